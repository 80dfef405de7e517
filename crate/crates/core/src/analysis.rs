//! Quantum density of states, entropy sweeps over the quench strength, and
//! finite-size scaling of the entropy peak.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigensolve::{eigh_tridiagonal, Spectrum};
use crate::error::{AlmgError, Result};
use crate::fit::{linear_fit, LinearFit};
use crate::spinmodel::{sector_hamiltonian, ModelParams, Parity};
use crate::workstats::{critical_quench, Esqpt, PreparedState};

/// Number of parity sectors; a single sector holds about half of the levels
/// at any energy.
pub const PARITY_SECTORS: f64 = 2.0;

/// Default bin count `max(50, dim/20)`.
pub fn default_bins(dim: usize) -> usize {
    (dim / 20).max(50)
}

/// Histogram of rescaled excitation energies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DosHistogram {
    pub n: usize,
    pub dim: usize,
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// `ρ̃ = count/(width·N)`.
    pub rescaled: Vec<f64>,
    /// Same normalization, with counts taken from the piecewise-linear level
    /// staircase through `(ε_k, k + 1/2)`. Removes the ±1 quantization of
    /// integer bin counts.
    pub smoothed: Vec<f64>,
}

impl DosHistogram {
    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn bin_width(&self, i: usize) -> f64 {
        self.edges[i + 1] - self.edges[i]
    }

    /// Index of the bin containing `eps` (`[lo, hi)`, last bin closed).
    pub fn bin_of(&self, eps: f64) -> Option<usize> {
        let last = self.edges.len() - 1;
        if eps < self.edges[0] || eps > self.edges[last] {
            return None;
        }
        Some(self.edges.partition_point(|&x| x <= eps).clamp(1, last) - 1)
    }

    /// Smoothed density rescaled to the full `j = N/2` multiplet, comparable
    /// to the semiclassical density of states.
    pub fn full_space_smoothed(&self) -> Vec<f64> {
        self.smoothed.iter().map(|r| PARITY_SECTORS * r).collect()
    }
}

/// Piecewise-linear cumulative level count.
fn staircase(levels: &[f64], x: f64) -> f64 {
    let n = levels.len();
    if x < levels[0] {
        return 0.0;
    }
    if x > levels[n - 1] {
        return n as f64;
    }
    let k = levels.partition_point(|&e| e <= x);
    if k == 0 {
        return 0.5;
    }
    if k >= n {
        return n as f64 - 0.5;
    }
    let (a, b) = (levels[k - 1], levels[k]);
    let t = if b > a { (x - a) / (b - a) } else { 1.0 };
    (k - 1) as f64 + 0.5 + t
}

/// Histogram of sorted rescaled levels `eps` on arbitrary `edges`.
pub fn dos_on_edges(eps: &[f64], n: usize, edges: &[f64]) -> Result<DosHistogram> {
    if edges.len() < 3 {
        return Err(AlmgError::Parameter("need at least two bins".into()));
    }
    if edges.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(AlmgError::Parameter("bin edges must be strictly increasing".into()));
    }
    if eps.is_empty() {
        return Err(AlmgError::Parameter("empty spectrum".into()));
    }
    let bins = edges.len() - 1;
    let mut counts = vec![0usize; bins];
    let last = edges[bins];
    for &e in eps {
        if e < edges[0] || e > last {
            continue;
        }
        let idx = edges.partition_point(|&x| x <= e).clamp(1, bins) - 1;
        counts[idx] += 1;
    }
    let nf = n as f64;
    let rescaled = counts
        .iter()
        .zip(edges.windows(2))
        .map(|(&c, w)| c as f64 / ((w[1] - w[0]) * nf))
        .collect();
    let smoothed = edges
        .windows(2)
        .map(|w| (staircase(eps, w[1]) - staircase(eps, w[0])) / ((w[1] - w[0]) * nf))
        .collect();
    Ok(DosHistogram { n, dim: eps.len(), edges: edges.to_vec(), counts, rescaled, smoothed })
}

/// Rescaled quantum density of states over `[0, ε_max]`.
pub fn quantum_dos(spec: &Spectrum, bins: usize) -> Result<DosHistogram> {
    if bins < 2 {
        return Err(AlmgError::Parameter(format!("need at least 2 bins, got {bins}")));
    }
    let eps = spec.excitation_energies();
    let top = *eps.last().unwrap();
    if !(top > 0.0) {
        return Err(AlmgError::Parameter("spectrum has zero width".into()));
    }
    let w = top / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|k| if k == bins { top } else { w * k as f64 }).collect();
    dos_on_edges(&eps, spec.params.n, &edges)
}

/// Smoothed full-multiplet `ρ̃` in a window of width `width` centered on `eps`.
pub fn dos_at(spec: &Spectrum, eps: f64, width: f64) -> f64 {
    let levels = spec.excitation_energies();
    let lo = staircase(&levels, eps - width / 2.0);
    let hi = staircase(&levels, eps + width / 2.0);
    PARITY_SECTORS * (hi - lo) / (width * spec.params.n as f64)
}

/// Smoothed full-multiplet `ρ̃` at fixed `eps` across a set of `γ` values.
pub fn dos_slice(alpha: f64, n: usize, eps: f64, width: f64, gammas: &[f64]) -> Result<Vec<(f64, f64)>> {
    if !(width > 0.0) {
        return Err(AlmgError::Parameter(format!("window width must be positive, got {width}")));
    }
    gammas
        .par_iter()
        .map(|&g| {
            let p = ModelParams::reduced(n, g, alpha)?;
            let s = Spectrum::compute(&p, Parity::Even, false)?;
            Ok((g, dos_at(&s, eps, width)))
        })
        .collect()
}

/// Indices of the `count` largest entries, each at least `min_separation`
/// positions away from those already chosen. Ties go to the lower index.
pub fn dominant_peaks(values: &[f64], count: usize, min_separation: usize) -> Vec<usize> {
    let mut chosen: Vec<usize> = Vec::new();
    while chosen.len() < count {
        let best = values
            .iter()
            .enumerate()
            .filter(|(i, _)| chosen.iter().all(|&c| i.abs_diff(c) >= min_separation))
            .fold(None, |acc: Option<(usize, f64)>, (i, &v)| match acc {
                Some((_, bv)) if bv >= v => acc,
                _ => Some((i, v)),
            });
        match best {
            Some((i, _)) => chosen.push(i),
            None => break,
        }
    }
    chosen
}

/// Indices of strict local maxima of a sequence.
pub fn local_maxima(values: &[f64]) -> Vec<usize> {
    (1..values.len().saturating_sub(1))
        .filter(|&i| values[i] > values[i - 1] && values[i] > values[i + 1])
        .collect()
}

/// Entropy of `P(W)` across rescaled quench strengths `δγ̃ = δγ/δγ_c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropySweep {
    pub which: Esqpt,
    pub gamma_i: f64,
    pub alpha: f64,
    pub n: usize,
    pub critical_quench: f64,
    /// Evaluated grid points (out-of-range points removed).
    pub grid: Vec<f64>,
    pub entropies: Vec<f64>,
    /// Grid points dropped because `γ_f` left `[0, 1]`.
    pub dropped: Vec<f64>,
    /// Refined location of the maximum, `δγ̃_m`.
    pub argmax: f64,
    /// Refined maximum, `S_{W,m}`.
    pub max: f64,
}

/// `n` evenly spaced points covering `[lo, hi]`.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|k| if k == n - 1 { hi } else { lo + step * k as f64 }).collect()
}

/// Default sweep grid: 161 points over `[0.2, 1.8]`.
pub fn default_sweep_grid() -> Vec<f64> {
    linear_grid(0.2, 1.8, 161)
}

/// Vertex of the parabola through three points.
fn parabola_vertex(x: [f64; 3], y: [f64; 3]) -> Option<(f64, f64)> {
    let d01 = x[0] - x[1];
    let d02 = x[0] - x[2];
    let d12 = x[1] - x[2];
    let denom = d01 * d02 * d12;
    if denom == 0.0 {
        return None;
    }
    let a = (x[2] * (y[1] - y[0]) + x[1] * (y[0] - y[2]) + x[0] * (y[2] - y[1])) / denom;
    let b = (x[2] * x[2] * (y[0] - y[1]) + x[1] * x[1] * (y[2] - y[0]) + x[0] * x[0] * (y[1] - y[2])) / denom;
    let c = (x[1] * x[2] * d12 * y[0] - x[2] * x[0] * d02 * y[1] + x[0] * x[1] * d01 * y[2]) / denom;
    if !(a < 0.0) {
        return None;
    }
    let xv = -b / (2.0 * a);
    Some((xv, c - b * b / (4.0 * a)))
}

/// Grid maximum refined by a three-point parabola; falls back to the grid
/// point at the ends of the grid or when the neighbors are not concave.
pub fn refine_maximum(grid: &[f64], values: &[f64]) -> Option<(f64, f64)> {
    let (i, &vmax) = values
        .iter()
        .enumerate()
        .fold(None, |acc: Option<(usize, &f64)>, (i, v)| match acc {
            Some((_, bv)) if bv >= v => acc,
            _ => Some((i, v)),
        })?;
    if i == 0 || i + 1 == values.len() {
        return Some((grid[i], vmax));
    }
    let x = [grid[i - 1], grid[i], grid[i + 1]];
    let y = [values[i - 1], values[i], values[i + 1]];
    match parabola_vertex(x, y) {
        Some((xv, yv)) if xv >= x[0] && xv <= x[2] => Some((xv, yv.max(vmax))),
        _ => Some((grid[i], vmax)),
    }
}

/// Sweeps the rescaled quench strength for one transition. The initial
/// state is the ground state for the first ESQPT and the highest state of
/// the even sector for the second.
pub fn entropy_sweep(
    which: Esqpt,
    gamma_i: f64,
    alpha: f64,
    n: usize,
    grid: &[f64],
) -> Result<EntropySweep> {
    if grid.is_empty() {
        return Err(AlmgError::Parameter("empty sweep grid".into()));
    }
    let cq = critical_quench(gamma_i, alpha, which)?;
    let params = ModelParams::reduced(n, gamma_i, alpha)?;
    let prepared = PreparedState::new(&params, Parity::Even, which.initial_state())?;

    let (kept, dropped): (Vec<f64>, Vec<f64>) = grid
        .iter()
        .copied()
        .partition(|t| (0.0..=1.0).contains(&(gamma_i + t * cq.value)));
    let entropies = kept
        .par_iter()
        .map(|t| prepared.quench(t * cq.value).map(|wd| wd.entropy))
        .collect::<Result<Vec<f64>>>()?;
    let (argmax, max) = refine_maximum(&kept, &entropies).ok_or_else(|| {
        AlmgError::Parameter("every grid point leaves the admissible gamma range".into())
    })?;
    Ok(EntropySweep {
        which,
        gamma_i,
        alpha,
        n,
        critical_quench: cq.value,
        grid: kept,
        entropies,
        dropped,
        argmax,
        max,
    })
}

/// Power-law fit of the entropy peak versus system size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub sizes: Vec<usize>,
    pub argmaxes: Vec<f64>,
    pub maxima: Vec<f64>,
    /// Negated slope of `ln|1 − δγ̃_m|` against `ln N`.
    pub mu: f64,
    pub mu_stderr: f64,
    pub mu_r_squared: f64,
    pub mu_residuals: Vec<f64>,
    /// Slope of `S_{W,m}` against `ln N`.
    pub nu: f64,
    pub nu_stderr: f64,
    pub nu_r_squared: f64,
    pub nu_residuals: Vec<f64>,
    /// `|1 − δγ̃_m|` is not strictly decreasing in `N`.
    pub low_confidence: bool,
}

/// Fits `|1 − δγ̃_m| ∝ N^(−μ)` and `S_{W,m} ≈ ν ln N + c`.
pub fn fit_scaling(sizes: &[usize], argmaxes: &[f64], maxima: &[f64]) -> Result<ScalingFit> {
    if sizes.len() != argmaxes.len() || sizes.len() != maxima.len() {
        return Err(AlmgError::Parameter("scaling inputs differ in length".into()));
    }
    let ln_n: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
    let dist: Vec<f64> = argmaxes.iter().map(|a| (1.0 - a).abs()).collect();
    if dist.iter().any(|&d| d == 0.0) {
        return Err(AlmgError::Parameter("an entropy peak sits exactly at 1; ln|1 − δγ̃| diverges".into()));
    }
    let ln_d: Vec<f64> = dist.iter().map(|d| d.ln()).collect();
    let mu_fit: LinearFit = linear_fit(&ln_n, &ln_d)?;
    let nu_fit: LinearFit = linear_fit(&ln_n, maxima)?;
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by_key(|&i| sizes[i]);
    let low_confidence = order.windows(2).any(|w| dist[w[1]] >= dist[w[0]]);
    Ok(ScalingFit {
        sizes: sizes.to_vec(),
        argmaxes: argmaxes.to_vec(),
        maxima: maxima.to_vec(),
        mu: -mu_fit.slope,
        mu_stderr: mu_fit.slope_stderr,
        mu_r_squared: mu_fit.r_squared,
        mu_residuals: mu_fit.residuals,
        nu: nu_fit.slope,
        nu_stderr: nu_fit.slope_stderr,
        nu_r_squared: nu_fit.r_squared,
        nu_residuals: nu_fit.residuals,
        low_confidence,
    })
}

/// Default sizes for the scaling fit.
pub const DEFAULT_SIZES: [usize; 5] = [200, 400, 800, 1600, 3200];

/// Entropy sweeps at each size followed by the two scaling fits.
pub fn scaling_fit(
    which: Esqpt,
    gamma_i: f64,
    alpha: f64,
    sizes: &[usize],
    grid: &[f64],
) -> Result<(ScalingFit, Vec<EntropySweep>)> {
    if sizes.len() < 4 {
        return Err(AlmgError::Parameter(format!(
            "scaling fit needs at least 4 sizes, got {}",
            sizes.len()
        )));
    }
    let sweeps = sizes
        .iter()
        .map(|&n| entropy_sweep(which, gamma_i, alpha, n, grid))
        .collect::<Result<Vec<_>>>()?;
    let argmaxes: Vec<f64> = sweeps.iter().map(|s| s.argmax).collect();
    let maxima: Vec<f64> = sweeps.iter().map(|s| s.max).collect();
    Ok((fit_scaling(sizes, &argmaxes, &maxima)?, sweeps))
}

/// Second derivative of the ground-state energy density across `γ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundStateCurvature {
    pub alpha: f64,
    pub n: usize,
    /// `(γ, d²(E₀/N)/dγ²)` at the interior grid points.
    pub points: Vec<(f64, f64)>,
    /// Location of the largest `|d²(E₀/N)/dγ²|`.
    pub peak_gamma: f64,
    pub peak_value: f64,
}

/// Finite-difference curvature of `E₀/N`; its peak marks the ground-state
/// transition at `γ_c = 1/3`.
pub fn gs_qpt_marker(alpha: f64, n: usize, gamma_grid: &[f64]) -> Result<GroundStateCurvature> {
    if gamma_grid.len() < 3 {
        return Err(AlmgError::Parameter("need at least 3 gamma values".into()));
    }
    if gamma_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(AlmgError::Parameter("gamma grid must be strictly increasing".into()));
    }
    let energies = gamma_grid
        .par_iter()
        .map(|&g| {
            let p = ModelParams::reduced(n, g, alpha)?;
            let (_, op) = sector_hamiltonian(&p, Parity::Even)?;
            Ok(eigh_tridiagonal(&op, false)?.values[0] / n as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    let points: Vec<(f64, f64)> = (1..gamma_grid.len() - 1)
        .map(|i| {
            let (x0, x1, x2) = (gamma_grid[i - 1], gamma_grid[i], gamma_grid[i + 1]);
            let (y0, y1, y2) = (energies[i - 1], energies[i], energies[i + 1]);
            let d2 = 2.0 * ((y2 - y1) / (x2 - x1) - (y1 - y0) / (x1 - x0)) / (x2 - x0);
            (x1, d2)
        })
        .collect();
    let &(peak_gamma, peak_value) = points
        .iter()
        .fold(None, |acc: Option<&(f64, f64)>, pt| match acc {
            Some(b) if b.1.abs() >= pt.1.abs() => acc,
            _ => Some(pt),
        })
        .unwrap();
    Ok(GroundStateCurvature { alpha, n, points, peak_gamma, peak_value })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_power_law() {
        let sizes = [200usize, 400, 800, 1600, 3200];
        let argmaxes: Vec<f64> = sizes.iter().map(|&n| 1.0 + 1.0 / n as f64).collect();
        let maxima: Vec<f64> = sizes.iter().map(|&n| 0.57 * (n as f64).ln() + 0.3).collect();
        let fit = fit_scaling(&sizes, &argmaxes, &maxima).unwrap();
        assert!((fit.mu - 1.0).abs() < 1e-10);
        assert!((fit.mu_r_squared - 1.0).abs() < 1e-12);
        assert!((fit.nu - 0.57).abs() < 1e-10);
        assert!(!fit.low_confidence);
    }

    #[test]
    fn non_monotone_is_flagged() {
        let sizes = [200usize, 400, 800, 1600];
        let argmaxes = [1.01, 1.005, 1.006, 1.001];
        let fit = fit_scaling(&sizes, &argmaxes, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(fit.low_confidence);
    }

    #[test]
    fn uniform_spectrum_is_flat() {
        let n = 5000;
        let eps: Vec<f64> = (0..5000).map(|k| k as f64 / 4999.0).collect();
        let edges: Vec<f64> = (0..=50).map(|k| k as f64 / 50.0).collect();
        let h = dos_on_edges(&eps, n, &edges).unwrap();
        let max = *h.counts.iter().max().unwrap() as f64;
        let min = *h.counts.iter().min().unwrap() as f64;
        assert!(max / min < 1.3);
        assert_eq!(h.counts.iter().sum::<usize>(), 5000);
    }

    #[test]
    fn too_few_bins() {
        let p = ModelParams::new(20, 0.7, 0.5).unwrap();
        let s = Spectrum::compute(&p, Parity::Even, false).unwrap();
        assert!(quantum_dos(&s, 1).is_err());
        assert!(quantum_dos(&s, 2).is_ok());
    }

    #[test]
    fn staircase_counts_levels() {
        let levels = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(staircase(&levels, -0.1), 0.0);
        assert_eq!(staircase(&levels, 0.0), 0.5);
        assert_eq!(staircase(&levels, 1.5), 2.0);
        assert_eq!(staircase(&levels, 3.0), 3.5);
        assert_eq!(staircase(&levels, 3.1), 4.0);
    }

    #[test]
    fn peak_selection() {
        let v = [0.0, 5.0, 4.9, 1.0, 0.0, 3.0, 0.0];
        assert_eq!(dominant_peaks(&v, 2, 1), vec![1, 2]);
        assert_eq!(dominant_peaks(&v, 2, 3), vec![1, 5]);
        assert_eq!(local_maxima(&v), vec![1, 5]);
    }

    #[test]
    fn parabolic_refinement() {
        let grid = linear_grid(0.0, 1.0, 11);
        let vals: Vec<f64> = grid.iter().map(|x| 2.0 - (x - 0.437f64).powi(2)).collect();
        let (xm, ym) = refine_maximum(&grid, &vals).unwrap();
        assert!((xm - 0.437).abs() < 1e-12);
        assert!((ym - 2.0).abs() < 1e-12);
        // maximum at the boundary stays on the grid
        let vals: Vec<f64> = grid.iter().map(|x| *x).collect();
        assert_eq!(refine_maximum(&grid, &vals).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn sweep_drops_out_of_range_points() {
        let grid = [0.5, 1.0, 3.0];
        let s = entropy_sweep(Esqpt::First, 0.7, 0.5, 40, &grid).unwrap();
        assert_eq!(s.dropped, vec![3.0]);
        assert_eq!(s.grid, vec![0.5, 1.0]);
    }

    #[test]
    fn scaling_needs_four_sizes() {
        let g = default_sweep_grid();
        assert!(scaling_fit(Esqpt::First, 0.7, 0.5, &[100, 200, 400], &g).is_err());
    }

    #[test]
    fn default_grid_shape() {
        let g = default_sweep_grid();
        assert_eq!(g.len(), 161);
        assert_eq!(g[0], 0.2);
        assert_eq!(g[160], 1.8);
        assert!((g[80] - 1.0).abs() < 1e-15);
    }
}
