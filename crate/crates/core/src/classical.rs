//! Classical limit of the anharmonic LMG model.
//!
//! Phase space is the disk `p² + q² ≤ 4`; the whole rim corresponds to the
//! single spin configuration `|j, j⟩`. The classical energy function is
//!
//! ```text
//! H_c(p, q) = (1 − γ)/4 (p² + q²) − γ/8 q² (4 − p² − q²) − α/16 (p² + q²)² + γ/2
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AlmgError, Result};
use crate::fit::{linear_fit, LinearFit};

/// Critical control parameter of the ground-state transition.
pub const GAMMA_C: f64 = 1.0 / 3.0;

/// Hessian determinants and traces below this magnitude count as degenerate.
pub const DEGENERACY_THRESHOLD: f64 = 1e-10;

/// Radius squared of the phase-space disk.
const DISK_R2: f64 = 4.0;

/// `(γ, α)` pair entering the classical energy function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Couplings {
    pub gamma: f64,
    pub alpha: f64,
}

impl Couplings {
    pub fn new(gamma: f64, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(AlmgError::Parameter(format!("gamma must lie in [0, 1], got {gamma}")));
        }
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(AlmgError::Parameter(format!("alpha must be >= 0, got {alpha}")));
        }
        Ok(Self { gamma, alpha })
    }

    fn energy(&self, p: f64, q: f64) -> f64 {
        let (g, a) = (self.gamma, self.alpha);
        let r2 = p * p + q * q;
        (1.0 - g) / 4.0 * r2 - g / 8.0 * q * q * (4.0 - r2) - a / 16.0 * r2 * r2 + g / 2.0
    }

    /// `(∂H/∂p, ∂H/∂q)`.
    fn gradient(&self, p: f64, q: f64) -> (f64, f64) {
        let (g, a) = (self.gamma, self.alpha);
        let r2 = p * p + q * q;
        let dp = (1.0 - g) / 2.0 * p + g / 4.0 * q * q * p - a / 4.0 * p * r2;
        let dq = (1.0 - g) / 2.0 * q - g / 4.0 * q * (4.0 - p * p - 2.0 * q * q) - a / 4.0 * q * r2;
        (dp, dq)
    }

    /// `[[H_pp, H_pq], [H_pq, H_qq]]`.
    fn hessian(&self, p: f64, q: f64) -> [[f64; 2]; 2] {
        let (g, a) = (self.gamma, self.alpha);
        let hpp = (1.0 - g) / 2.0 + g / 4.0 * q * q - a / 4.0 * (3.0 * p * p + q * q);
        let hqq = (1.0 - g) / 2.0 - g + g / 4.0 * p * p + 1.5 * g * q * q
            - a / 4.0 * (p * p + 3.0 * q * q);
        let hpq = (g - a) / 2.0 * p * q;
        [[hpp, hpq], [hpq, hqq]]
    }
}

/// A point of the phase-space disk.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub p: f64,
    pub q: f64,
}

impl PhasePoint {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        let pt = Self { p, q };
        pt.check()?;
        Ok(pt)
    }

    pub fn radius_sq(&self) -> f64 {
        self.p * self.p + self.q * self.q
    }

    fn check(&self) -> Result<()> {
        // a few ulps of slack so closed-form rim points are accepted
        if !(self.radius_sq() <= DISK_R2 * (1.0 + 4.0 * f64::EPSILON)) {
            return Err(AlmgError::Domain(format!(
                "(p, q) = ({}, {}) lies outside the disk p² + q² <= 4",
                self.p, self.q
            )));
        }
        Ok(())
    }
}

/// Classical energy `H_c(p, q)`.
pub fn classical_hamiltonian(c: &Couplings, pt: &PhasePoint) -> Result<f64> {
    pt.check()?;
    Ok(c.energy(pt.p, pt.q))
}

/// Hamilton's equations, returned as `(dq/dt, dp/dt) = (∂H/∂p, −∂H/∂q)`.
pub fn equations_of_motion(c: &Couplings, pt: &PhasePoint) -> Result<(f64, f64)> {
    pt.check()?;
    let (dp, dq) = c.gradient(pt.p, pt.q);
    Ok((dp, -dq))
}

/// One sample of a classical trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub p: f64,
    pub q: f64,
    pub energy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    /// Set when the integration stopped because a step left the disk.
    pub exited_domain: bool,
}

impl Trajectory {
    pub fn energy_drift(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => (b.energy - a.energy).abs(),
            _ => 0.0,
        }
    }
}

/// Classic fourth-order Runge–Kutta integration of the equations of motion.
///
/// Returns `steps + 1` samples including the start unless the trajectory
/// leaves the open disk, in which case it is truncated and flagged.
pub fn integrate_trajectory(
    c: &Couplings,
    start: &PhasePoint,
    dt: f64,
    steps: usize,
) -> Result<Trajectory> {
    start.check()?;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(AlmgError::Parameter(format!("time step must be positive, got {dt}")));
    }
    let rhs = |p: f64, q: f64| {
        let (dp, dq) = c.gradient(p, q);
        (-dq, dp) // (dp/dt, dq/dt)
    };
    let inside = |p: f64, q: f64| p * p + q * q < DISK_R2;

    let mut samples = Vec::with_capacity(steps + 1);
    let (mut p, mut q) = (start.p, start.q);
    samples.push(TrajectorySample { t: 0.0, p, q, energy: c.energy(p, q) });
    let mut exited = false;
    for step in 1..=steps {
        let (k1p, k1q) = rhs(p, q);
        let (k2p, k2q) = rhs(p + 0.5 * dt * k1p, q + 0.5 * dt * k1q);
        let (k3p, k3q) = rhs(p + 0.5 * dt * k2p, q + 0.5 * dt * k2q);
        let (k4p, k4q) = rhs(p + dt * k3p, q + dt * k3q);
        let np = p + dt / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
        let nq = q + dt / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
        if !inside(np, nq) {
            exited = true;
            break;
        }
        p = np;
        q = nq;
        samples.push(TrajectorySample { t: step as f64 * dt, p, q, energy: c.energy(p, q) });
    }
    Ok(Trajectory { samples, exited_domain: exited })
}

/// Which closed-form family a fixed point belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedPointFamily {
    /// `(0, 0)`, energy `γ/2`.
    Origin,
    /// `(0, ±√(2(3γ − 1)/(2γ − α)))`, present for `γ ≥ 1/3`.
    Broken,
    /// `(±√((2γ + 2 − 4α)/γ), ±√((4α − 2 + 2γ)/γ))`, on the rim, present for
    /// `γ ≥ |1 − 2α|`.
    Rim,
    /// `(±√(2(1 − γ)/α), 0)`, the remaining zeros of the equations of motion.
    Axial,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Minimum,
    Saddle,
    Maximum,
    /// Degenerate Hessian.
    Bifurcation,
}

impl std::fmt::Display for Stability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Stability::Minimum => "minimum",
            Stability::Saddle => "saddle",
            Stability::Maximum => "maximum",
            Stability::Bifurcation => "bifurcation point",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub family: FixedPointFamily,
    pub p: f64,
    pub q: f64,
    pub energy: f64,
    pub stability: Stability,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPointReport {
    pub gamma: f64,
    pub alpha: f64,
    pub points: Vec<FixedPoint>,
}

impl FixedPointReport {
    pub fn family(&self, family: FixedPointFamily) -> impl Iterator<Item = &FixedPoint> {
        self.points.iter().filter(move |fp| fp.family == family)
    }
}

fn classify(c: &Couplings, p: f64, q: f64) -> Stability {
    let [[a, b], [_, d]] = c.hessian(p, q);
    let det = a * d - b * b;
    let tr = a + d;
    if det < -DEGENERACY_THRESHOLD {
        Stability::Saddle
    } else if det > DEGENERACY_THRESHOLD && tr > 0.0 {
        Stability::Minimum
    } else if det > DEGENERACY_THRESHOLD && tr < 0.0 {
        Stability::Maximum
    } else {
        Stability::Bifurcation
    }
}

/// `+x` and `−x`, or just `0` when `x` vanishes.
fn signed(x: f64) -> Vec<f64> {
    if x == 0.0 {
        vec![0.0]
    } else {
        vec![x, -x]
    }
}

/// All zeros of the equations of motion on the closed disk, with energies
/// and Hessian stability labels.
pub fn find_fixed_points(c: &Couplings) -> FixedPointReport {
    let (g, a) = (c.gamma, c.alpha);
    let mut raw: Vec<(FixedPointFamily, f64, f64)> = vec![(FixedPointFamily::Origin, 0.0, 0.0)];

    if g >= GAMMA_C && 2.0 * g - a > 0.0 {
        let q1_sq = 2.0 * (3.0 * g - 1.0) / (2.0 * g - a);
        if q1_sq <= DISK_R2 {
            for q in signed(q1_sq.max(0.0).sqrt()) {
                raw.push((FixedPointFamily::Broken, 0.0, q));
            }
        }
    }
    if g > 0.0 && g >= (1.0 - 2.0 * a).abs() {
        let p2 = ((2.0 * g + 2.0 - 4.0 * a) / g).max(0.0).sqrt();
        let q2 = ((4.0 * a - 2.0 + 2.0 * g) / g).max(0.0).sqrt();
        for p in signed(p2) {
            for q in signed(q2) {
                raw.push((FixedPointFamily::Rim, p, q));
            }
        }
    }
    if a > 0.0 && g < 1.0 {
        let p3_sq = 2.0 * (1.0 - g) / a;
        if p3_sq < DISK_R2 {
            for p in signed(p3_sq.sqrt()) {
                raw.push((FixedPointFamily::Axial, p, 0.0));
            }
        }
    }

    let points = raw
        .into_iter()
        .map(|(family, p, q)| FixedPoint {
            family,
            p,
            q,
            energy: c.energy(p, q),
            stability: classify(c, p, q),
        })
        .collect();
    FixedPointReport { gamma: g, alpha: a, points }
}

/// Lowest and highest value of `H_c` over the disk.
///
/// The extrema are attained at fixed points or on the rim, where `H_c` is
/// constant (`1 − γ/2 − α`).
pub fn energy_range(c: &Couplings) -> (f64, f64) {
    let rim = 1.0 - c.gamma / 2.0 - c.alpha;
    find_fixed_points(c)
        .points
        .iter()
        .map(|fp| fp.energy)
        .fold((rim, rim), |(lo, hi), e| (lo.min(e), hi.max(e)))
}

/// ESQPT critical excitation energies at `(γ, α)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalEnergies {
    pub gamma: f64,
    pub alpha: f64,
    /// Present only for `γ ≥ 1/3`.
    pub eps_c1: Option<f64>,
    pub eps_c2: f64,
}

/// `ε_c1 = (3γ − 1)²/(4(2γ − α))` for `γ ≥ 1/3`, and the two-branch
/// `ε_c2` (`1 − γ − α` below 1/3, `(1 + γ − 2α)²/(4(2γ − α))` above).
pub fn critical_energies(c: &Couplings) -> Result<CriticalEnergies> {
    let (g, a) = (c.gamma, c.alpha);
    if g < GAMMA_C {
        let eps_c2 = 1.0 - g - a;
        if eps_c2 < 0.0 {
            return Err(AlmgError::Validity(format!(
                "alpha = {a} > 1 − gamma: the rim is the classical minimum and no second ESQPT exists"
            )));
        }
        return Ok(CriticalEnergies { gamma: g, alpha: a, eps_c1: None, eps_c2 });
    }
    let den = 2.0 * g - a;
    if den.abs() < 1e-12 {
        return Err(AlmgError::Singular(format!("2·gamma = alpha = {a}")));
    }
    if den < 0.0 {
        return Err(AlmgError::Validity(format!(
            "critical energies need 2·gamma > alpha, got gamma = {g}, alpha = {a}"
        )));
    }
    Ok(CriticalEnergies {
        gamma: g,
        alpha: a,
        eps_c1: Some((3.0 * g - 1.0).powi(2) / (4.0 * den)),
        eps_c2: (1.0 + g - 2.0 * a).powi(2) / (4.0 * den),
    })
}

/// Evenly spaced bin edges.
pub fn uniform_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let w = (hi - lo) / bins as f64;
    (0..=bins).map(|k| if k == bins { hi } else { lo + w * k as f64 }).collect()
}

/// Monte Carlo estimate of the semiclassical density of states on a set of
/// energy bins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemiclassicalDos {
    pub gamma: f64,
    pub alpha: f64,
    /// Energy offset subtracted from `H_c` (the classical minimum).
    pub energy_shift: f64,
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub rho: Vec<f64>,
    pub stderr: Vec<f64>,
    pub samples: u64,
    pub seed: u64,
}

impl SemiclassicalDos {
    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Bins with no samples; their relative error is unbounded.
    pub fn empty_bins(&self) -> Vec<usize> {
        self.counts.iter().enumerate().filter(|(_, &c)| c == 0).map(|(i, _)| i).collect()
    }

    /// `∫ ρ dε` over the grid.
    pub fn integral(&self) -> f64 {
        self.rho.iter().zip(self.edges.windows(2)).map(|(r, w)| r * (w[1] - w[0])).sum()
    }
}

/// Samples per independent random stream.
const MC_CHUNK: u64 = 1 << 16;

/// `ρ_sc(ε) = (1/4π) ∫ dp dq δ(ε − H̃_c)` with `H̃_c = H_c − min H_c`,
/// estimated by uniform sampling of the disk.
///
/// Chunk `k` of the sample budget draws from stream `k` of a ChaCha generator
/// keyed by `seed`, so the result does not depend on the worker count.
pub fn semiclassical_dos(
    c: &Couplings,
    edges: &[f64],
    samples: u64,
    seed: u64,
) -> Result<SemiclassicalDos> {
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(AlmgError::Parameter("bin edges must be strictly increasing".into()));
    }
    if samples == 0 {
        return Err(AlmgError::Parameter("need at least one sample".into()));
    }
    let shift = energy_range(c).0;
    let bins = edges.len() - 1;
    let chunks = samples.div_ceil(MC_CHUNK);
    let per_chunk: Vec<Vec<u64>> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k);
            let n = MC_CHUNK.min(samples - k * MC_CHUNK);
            let mut counts = vec![0u64; bins];
            for _ in 0..n {
                let u: f64 = rng.random();
                let v: f64 = rng.random();
                let r = 2.0 * u.sqrt();
                let (s, co) = (std::f64::consts::TAU * v).sin_cos();
                let e = c.energy(r * co, r * s) - shift;
                let idx = edges.partition_point(|&x| x <= e);
                if idx >= 1 && idx <= bins {
                    counts[idx - 1] += 1;
                }
            }
            counts
        })
        .collect();
    let mut counts = vec![0u64; bins];
    for chunk in &per_chunk {
        for (acc, x) in counts.iter_mut().zip(chunk) {
            *acc += x;
        }
    }
    let m = samples as f64;
    let (rho, stderr) = counts
        .iter()
        .zip(edges.windows(2))
        .map(|(&cnt, w)| {
            let width = w[1] - w[0];
            let frac = cnt as f64 / m;
            (frac / width, (frac * (1.0 - frac) / m).sqrt() / width)
        })
        .unzip();
    Ok(SemiclassicalDos {
        gamma: c.gamma,
        alpha: c.alpha,
        energy_shift: shift,
        edges: edges.to_vec(),
        counts,
        rho,
        stderr,
        samples,
        seed,
    })
}

/// Side of a critical energy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Below,
    Above,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogDivergenceFit {
    pub side: Side,
    /// Distances `|ε − ε_c|` (geometric bin centers).
    pub distances: Vec<f64>,
    pub rho: Vec<f64>,
    /// `ρ ≈ a + b·(−ln|ε − ε_c|)`: `intercept = a`, `slope = b`.
    pub fit: LinearFit,
}

/// Fits `ρ_sc(ε) ≈ a − b ln|ε − ε_c|` on log-spaced bins with
/// `|ε − ε_c| ∈ [d_min, d_max]`, separately on each side of `ε_c` whose
/// window lies inside the classical energy range.
pub fn log_divergence_fit(
    c: &Couplings,
    eps_c: f64,
    window: (f64, f64),
    bins_per_side: usize,
    samples: u64,
    seed: u64,
) -> Result<Vec<LogDivergenceFit>> {
    let (d_min, d_max) = window;
    if !(0.0 < d_min && d_min < d_max) || bins_per_side < 3 {
        return Err(AlmgError::Parameter("invalid log-fit window".into()));
    }
    let (lo, hi) = energy_range(c);
    let top = hi - lo;
    let ratio = (d_max / d_min).powf(1.0 / bins_per_side as f64);
    let dists: Vec<f64> = (0..=bins_per_side).map(|k| d_min * ratio.powi(k as i32)).collect();

    let mut fits = Vec::new();
    for side in [Side::Below, Side::Above] {
        let admissible = match side {
            Side::Below => eps_c - d_max >= 0.0,
            Side::Above => eps_c + d_max <= top,
        };
        if !admissible {
            continue;
        }
        let mut edges: Vec<f64> = match side {
            Side::Below => dists.iter().map(|d| eps_c - d).collect(),
            Side::Above => dists.iter().map(|d| eps_c + d).collect(),
        };
        edges.sort_by(f64::total_cmp);
        let dos = semiclassical_dos(c, &edges, samples, seed)?;
        let mut distances = Vec::new();
        let mut rho = Vec::new();
        for (i, r) in dos.rho.iter().enumerate() {
            let d = ((edges[i] - eps_c).abs() * (edges[i + 1] - eps_c).abs()).sqrt();
            distances.push(d);
            rho.push(*r);
        }
        let x: Vec<f64> = distances.iter().map(|d| -d.ln()).collect();
        let fit = linear_fit(&x, &rho)?;
        fits.push(LogDivergenceFit { side, distances, rho, fit });
    }
    if fits.is_empty() {
        return Err(AlmgError::Parameter(format!(
            "no side of eps_c = {eps_c} has the window [{d_min}, {d_max}] inside [0, {top}]"
        )));
    }
    Ok(fits)
}
