//! The anharmonic LMG Hamiltonian in parity-resolved Dicke bases.
//!
//! Within the `j = N/2` multiplet the Hamiltonian
//!
//! ```text
//! H = (2γ/N)(J² − Jx²) + (1 − γ)(Jz + N/2) − (α/N)(Jz + N/2)(Jz + N/2 + 1)
//! ```
//!
//! only couples `m ↔ m ± 2`, so each parity sector ordered by ascending `m`
//! in steps of two carries an exactly tridiagonal matrix.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{AlmgError, Result};

/// Model parameters `(N, γ, α)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Number of spin-1/2 particles, `N = 2j`.
    pub n: usize,
    /// Control parameter in `[0, 1]`.
    pub gamma: f64,
    /// Anharmonicity strength.
    pub alpha: f64,
}

impl ModelParams {
    /// Validated parameters for the anharmonic model (`α > 0`).
    pub fn new(n: usize, gamma: f64, alpha: f64) -> Result<Self> {
        Self::check(n, gamma, alpha, false)
    }

    /// Plain LMG compatibility mode, where `α = 0` is admissible.
    pub fn reduced(n: usize, gamma: f64, alpha: f64) -> Result<Self> {
        Self::check(n, gamma, alpha, true)
    }

    fn check(n: usize, gamma: f64, alpha: f64, allow_zero_alpha: bool) -> Result<Self> {
        if n < 2 || n % 2 != 0 {
            return Err(AlmgError::Parameter(format!(
                "N must be even and at least 2, got {n}"
            )));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(AlmgError::Parameter(format!(
                "gamma must lie in [0, 1], got {gamma}"
            )));
        }
        let alpha_ok = if allow_zero_alpha { alpha >= 0.0 } else { alpha > 0.0 };
        if !alpha.is_finite() || !alpha_ok {
            return Err(AlmgError::Parameter(format!(
                "alpha must be {} 0, got {alpha}",
                if allow_zero_alpha { ">=" } else { ">" }
            )));
        }
        Ok(Self { n, gamma, alpha })
    }

    /// Same `N` and `α` at a different control parameter.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::check(self.n, gamma, self.alpha, true)
    }

    /// Total spin `j = N/2`.
    pub fn j(&self) -> i64 {
        (self.n / 2) as i64
    }
}

/// Eigenvalue of the parity operator `exp(iπ(j + Jz))`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl std::fmt::Display for Parity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Parity::Even => write!(f, "even"),
            Parity::Odd => write!(f, "odd"),
        }
    }
}

impl std::str::FromStr for Parity {
    type Err = AlmgError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "even" | "e" => Ok(Parity::Even),
            "odd" | "o" => Ok(Parity::Odd),
            other => Err(AlmgError::Parameter(format!("unknown parity '{other}'"))),
        }
    }
}

/// A parity sector of the `j = N/2` multiplet with its ordered Dicke basis.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpinSector {
    /// Total spin.
    pub j: i64,
    pub parity: Parity,
    /// Magnetic quantum numbers, strictly increasing in steps of two.
    pub basis: Vec<i64>,
}

impl SpinSector {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Number of particles `N = 2j`.
    pub fn n(&self) -> usize {
        (2 * self.j) as usize
    }
}

/// Builds the `(j, parity)` sector for the given parameters.
pub fn build_sector(params: &ModelParams, parity: Parity) -> Result<SpinSector> {
    // re-validate: the struct fields are public
    ModelParams::reduced(params.n, params.gamma, params.alpha)?;
    let j = params.j();
    let start = match parity {
        Parity::Even => -j,
        Parity::Odd => -j + 1,
    };
    let basis: Vec<i64> = (0..)
        .map(|k| start + 2 * k)
        .take_while(|&m| m <= j)
        .collect();
    Ok(SpinSector { j, parity, basis })
}

/// Real symmetric tridiagonal matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TridiagonalOperator {
    pub diag: Vec<f64>,
    pub offdiag: Vec<f64>,
}

impl TridiagonalOperator {
    pub fn new(diag: Vec<f64>, offdiag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(AlmgError::Parameter("empty tridiagonal operator".into()));
        }
        if offdiag.len() + 1 != diag.len() {
            return Err(AlmgError::Parameter(format!(
                "offdiagonal length {} does not match dimension {}",
                offdiag.len(),
                diag.len()
            )));
        }
        if diag.iter().chain(&offdiag).any(|x| !x.is_finite()) {
            return Err(AlmgError::Parameter("non-finite matrix element".into()));
        }
        Ok(Self { diag, offdiag })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn trace(&self) -> f64 {
        self.diag.iter().sum()
    }

    /// Infinity norm, an upper bound on the spectral radius.
    pub fn norm_inf(&self) -> f64 {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut row = self.diag[i].abs();
                if i > 0 {
                    row += self.offdiag[i - 1].abs();
                }
                if i + 1 < n {
                    row += self.offdiag[i].abs();
                }
                row
            })
            .fold(0.0, f64::max)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(x.len(), n, "vector length mismatch");
        let mut y: Vec<f64> = self.diag.iter().zip(x).map(|(d, v)| d * v).collect();
        for i in 0..n - 1 {
            y[i] += self.offdiag[i] * x[i + 1];
            y[i + 1] += self.offdiag[i] * x[i];
        }
        y
    }

    /// `xᵀ A x` for a real vector.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let n = self.dim();
        assert_eq!(x.len(), n, "vector length mismatch");
        let mut acc = 0.0;
        for i in 0..n {
            acc += self.diag[i] * x[i] * x[i];
        }
        for i in 0..n - 1 {
            acc += 2.0 * self.offdiag[i] * x[i] * x[i + 1];
        }
        acc
    }

    /// `⟨x|A|x⟩` for a complex vector.
    pub fn expectation_complex(&self, x: &[Complex64]) -> f64 {
        let n = self.dim();
        assert_eq!(x.len(), n, "vector length mismatch");
        let mut acc = 0.0;
        for i in 0..n {
            acc += self.diag[i] * x[i].norm_sqr();
        }
        for i in 0..n - 1 {
            acc += 2.0 * self.offdiag[i] * (x[i].conj() * x[i + 1]).re;
        }
        acc
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            m[i][i] = self.diag[i];
        }
        for i in 0..n - 1 {
            m[i][i + 1] = self.offdiag[i];
            m[i + 1][i] = self.offdiag[i];
        }
        m
    }
}

/// `⟨m|Jx²|m⟩ = (j(j+1) − m²)/2`.
fn jx2_diagonal(j: i64, m: i64) -> f64 {
    ((j * (j + 1) - m * m) as f64) / 2.0
}

/// `⟨m+2|Jx²|m⟩ = ¼ √[(j(j+1) − m(m+1))(j(j+1) − (m+1)(m+2))]`.
fn jx2_step(j: i64, m: i64) -> f64 {
    let jj = j * (j + 1);
    let a = (jj - m * (m + 1)) as f64;
    let b = (jj - (m + 1) * (m + 2)) as f64;
    0.25 * (a * b).sqrt()
}

/// Builds the sector Hamiltonian as a tridiagonal operator.
pub fn build_hamiltonian(params: &ModelParams, sector: &SpinSector) -> Result<TridiagonalOperator> {
    ModelParams::reduced(params.n, params.gamma, params.alpha)?;
    if sector.j != params.j() {
        return Err(AlmgError::Parameter(format!(
            "sector j = {} does not belong to N = {}",
            sector.j, params.n
        )));
    }
    let n = params.n as f64;
    let j = sector.j;
    let jj = (j * (j + 1)) as f64;
    let g = params.gamma;
    let a = params.alpha;
    let half_n = (params.n / 2) as i64;

    let diag = sector
        .basis
        .iter()
        .map(|&m| {
            let s = m + half_n;
            let interaction = (2.0 * g / n) * (jj - jx2_diagonal(j, m));
            let field = (1.0 - g) * s as f64;
            let anharmonic = (a / n) * ((s * (s + 1)) as f64);
            interaction + field - anharmonic
        })
        .collect();
    let offdiag = sector
        .basis
        .windows(2)
        .map(|w| -(2.0 * g / n) * jx2_step(j, w[0]))
        .collect();
    TridiagonalOperator::new(diag, offdiag)
}

/// Convenience: sector plus its Hamiltonian.
pub fn sector_hamiltonian(
    params: &ModelParams,
    parity: Parity,
) -> Result<(SpinSector, TridiagonalOperator)> {
    let sector = build_sector(params, parity)?;
    let op = build_hamiltonian(params, &sector)?;
    Ok((sector, op))
}

/// The full `(N+1) × (N+1)` Hamiltonian in ascending-`m` order, assembled
/// from both parity sectors. Intended for inspection at small `N`.
pub fn dense_hamiltonian(params: &ModelParams) -> Result<Vec<Vec<f64>>> {
    let dim = params.n + 1;
    let j = params.j();
    let mut h = vec![vec![0.0; dim]; dim];
    for parity in [Parity::Even, Parity::Odd] {
        let (sector, op) = sector_hamiltonian(params, parity)?;
        let idx: Vec<usize> = sector.basis.iter().map(|&m| (m + j) as usize).collect();
        for (a, &ia) in idx.iter().enumerate() {
            h[ia][ia] = op.diag[a];
            if a + 1 < idx.len() {
                let ib = idx[a + 1];
                h[ia][ib] = op.offdiag[a];
                h[ib][ia] = op.offdiag[a];
            }
        }
    }
    Ok(h)
}

/// A real state confined to one parity sector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub sector: SpinSector,
    pub amplitudes: Vec<f64>,
}

impl StateVector {
    pub fn new(sector: SpinSector, amplitudes: Vec<f64>) -> Result<Self> {
        if amplitudes.len() != sector.dim() {
            return Err(AlmgError::Parameter(format!(
                "state has {} amplitudes for a sector of dimension {}",
                amplitudes.len(),
                sector.dim()
            )));
        }
        let norm = amplitudes.iter().map(|a| a * a).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(AlmgError::Domain(format!("state norm {norm} differs from 1")));
        }
        Ok(Self { sector, amplitudes })
    }
}

/// SU(2) spin coherent state in the full `|j, m⟩` basis (both parities).
///
/// `amplitudes[k]` is the coefficient of `|j, m = k − j⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoherentState {
    /// Number of particles `N = 2j`.
    pub n: usize,
    pub xi: Complex64,
    pub amplitudes: Vec<Complex64>,
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

/// Coherent state at phase-space point `(p, q)`, `ξ = (q + ip)/√(4 − p² − q²)`.
///
/// The reference state is `|j, −j⟩` (the bottom of the multiplet), so that
/// `⟨Jz⟩ = j(|ξ|² − 1)/(|ξ|² + 1)` and `⟨J₋⟩ = 2jξ/(1 + |ξ|²)`; the origin of
/// the disk is the unexcited configuration and the rim maps to `|j, j⟩`.
pub fn coherent_state(n: usize, p: f64, q: f64) -> Result<CoherentState> {
    if n == 0 {
        return Err(AlmgError::Parameter("coherent state needs N >= 1".into()));
    }
    let r2 = p * p + q * q;
    if !(r2 < 4.0) {
        return Err(AlmgError::Domain(format!(
            "(p, q) = ({p}, {q}) lies outside the open disk p² + q² < 4"
        )));
    }
    let xi = Complex64::new(q, p) / (4.0 - r2).sqrt();
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); n + 1];
    if xi.norm() == 0.0 {
        amplitudes[0] = Complex64::new(1.0, 0.0);
        return Ok(CoherentState { n, xi, amplitudes });
    }
    let lf = ln_factorials(n);
    let ln_abs = xi.norm().ln();
    let phase = xi.arg();
    let ln_norm = 0.5 * n as f64 * (1.0 + xi.norm_sqr()).ln();
    for (k, amp) in amplitudes.iter_mut().enumerate() {
        let ln_binom = lf[n] - lf[k] - lf[n - k];
        let ln_mag = k as f64 * ln_abs + 0.5 * ln_binom - ln_norm;
        *amp = Complex64::from_polar(ln_mag.exp(), k as f64 * phase);
    }
    Ok(CoherentState { n, xi, amplitudes })
}

impl CoherentState {
    pub fn j(&self) -> f64 {
        self.n as f64 / 2.0
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn expectation_jz(&self) -> f64 {
        let j = self.j();
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(k, a)| (k as f64 - j) * a.norm_sqr())
            .sum()
    }

    /// `⟨J₋⟩`, with `J₋|j,m⟩ = √(j(j+1) − m(m−1)) |j,m−1⟩`.
    pub fn expectation_jminus(&self) -> Complex64 {
        let j = self.j();
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 1..=self.n {
            let m = k as f64 - j;
            let c = (j * (j + 1.0) - m * (m - 1.0)).sqrt();
            acc += self.amplitudes[k - 1].conj() * self.amplitudes[k] * c;
        }
        acc
    }

    /// `⟨ξ|H|ξ⟩` summed over both parity sectors.
    pub fn energy(&self, params: &ModelParams) -> Result<f64> {
        if params.n != self.n {
            return Err(AlmgError::Parameter(format!(
                "coherent state built for N = {}, Hamiltonian has N = {}",
                self.n, params.n
            )));
        }
        let j = params.j();
        let mut total = 0.0;
        for parity in [Parity::Even, Parity::Odd] {
            let (sector, op) = sector_hamiltonian(params, parity)?;
            let sub: Vec<Complex64> = sector
                .basis
                .iter()
                .map(|&m| self.amplitudes[(m + j) as usize])
                .collect();
            total += op.expectation_complex(&sub);
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sector_dimensions() {
        let p = ModelParams::new(130, 0.7, 0.5).unwrap();
        assert_eq!(build_sector(&p, Parity::Even).unwrap().dim(), 66);
        let p = ModelParams::new(800, 0.7, 0.5).unwrap();
        assert_eq!(build_sector(&p, Parity::Odd).unwrap().dim(), 400);
        assert_eq!(build_sector(&p, Parity::Even).unwrap().dim(), 401);
    }

    #[test]
    fn smallest_even_sector() {
        let p = ModelParams::new(2, 0.5, 0.5).unwrap();
        let s = build_sector(&p, Parity::Even).unwrap();
        assert_eq!(s.basis, vec![-1, 1]);
        let s = build_sector(&p, Parity::Odd).unwrap();
        assert_eq!(s.basis, vec![0]);
    }

    #[test]
    fn basis_parity_and_order() {
        let p = ModelParams::new(40, 0.3, 0.2).unwrap();
        for parity in [Parity::Even, Parity::Odd] {
            let s = build_sector(&p, parity).unwrap();
            for w in s.basis.windows(2) {
                assert_eq!(w[1] - w[0], 2);
            }
            let want = if parity == Parity::Even { 0 } else { 1 };
            assert!(s.basis.iter().all(|m| (s.j + m).rem_euclid(2) == want));
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(ModelParams::new(3, 0.5, 0.5), Err(AlmgError::Parameter(_))));
        assert!(matches!(ModelParams::new(0, 0.5, 0.5), Err(AlmgError::Parameter(_))));
        assert!(ModelParams::new(4, 1.5, 0.5).is_err());
        assert!(ModelParams::new(4, 0.5, 0.0).is_err());
        assert!(ModelParams::reduced(4, 0.5, 0.0).is_ok());
        let bad = ModelParams { n: 5, gamma: 0.5, alpha: 0.5 };
        assert!(build_sector(&bad, Parity::Even).is_err());
    }

    #[test]
    fn two_spin_hamiltonian() {
        let p = ModelParams::reduced(2, 0.5, 0.0).unwrap();
        let (_, op) = sector_hamiltonian(&p, Parity::Even).unwrap();
        assert!((op.diag[0] - 0.75).abs() < 1e-15);
        assert!((op.diag[1] - 1.75).abs() < 1e-15);
        assert!((op.offdiag[0] + 0.25).abs() < 1e-15);
    }

    #[test]
    fn jx_squared_center_element() {
        assert_eq!(jx2_diagonal(1, 0), 1.0);
    }

    #[test]
    fn zero_gamma_is_diagonal() {
        for n in [2, 10, 64] {
            let p = ModelParams::new(n, 0.0, 0.7).unwrap();
            let (_, op) = sector_hamiltonian(&p, Parity::Even).unwrap();
            assert!(op.offdiag.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn coherent_state_at_origin() {
        let cs = coherent_state(50, 0.0, 0.0).unwrap();
        assert_eq!(cs.amplitudes[0], Complex64::new(1.0, 0.0));
        assert!(cs.amplitudes[1..].iter().all(|a| a.norm() == 0.0));
    }

    #[test]
    fn coherent_state_outside_disk() {
        assert!(matches!(coherent_state(10, 2.0, 0.0), Err(AlmgError::Domain(_))));
        assert!(matches!(coherent_state(10, 1.5, 1.5), Err(AlmgError::Domain(_))));
    }

    #[test]
    fn coherent_state_jz() {
        let cs = coherent_state(80, 0.3, 0.5).unwrap();
        let x2 = cs.xi.norm_sqr();
        assert!((cs.norm() - 1.0).abs() < 1e-12);
        assert!((cs.expectation_jz() / 40.0 - (x2 - 1.0) / (x2 + 1.0)).abs() < 1e-10);
        let jm = cs.expectation_jminus();
        let want = cs.xi * (80.0 / (1.0 + x2));
        assert!((jm - want).norm() < 1e-10);
    }

    #[test]
    fn coherent_state_large_j_is_finite() {
        let cs = coherent_state(4000, 1.1, -0.7).unwrap();
        assert!(cs.amplitudes.iter().all(|a| a.re.is_finite() && a.im.is_finite()));
        assert!((cs.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn state_vector_norm_check() {
        let p = ModelParams::new(4, 0.5, 0.5).unwrap();
        let s = build_sector(&p, Parity::Even).unwrap();
        assert!(StateVector::new(s.clone(), vec![1.0, 0.0, 0.0]).is_ok());
        assert!(StateVector::new(s.clone(), vec![1.0, 1.0, 0.0]).is_err());
        assert!(StateVector::new(s, vec![1.0]).is_err());
    }
}
