//! Two-point-measurement work statistics for sudden quenches `γ_i → γ_i + δγ`.
//!
//! The system starts in an eigenstate `|ψ_n^i⟩` of `H(γ_i)`; with a sudden
//! quench the evolution is the identity and the joint probability reduces to
//! the overlap `p_{k,n} = |⟨ψ_k^f|ψ_n^i⟩|²`, with work `W_k = E_k^f − E_n^i`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::GAMMA_C;
use crate::eigensolve::{eigenvector, eigh_projected, eigh_tridiagonal};
use crate::error::{AlmgError, Result};
use crate::spinmodel::{sector_hamiltonian, ModelParams, Parity, TridiagonalOperator};

/// Probabilities below this are treated as exact zeros in the entropy sum.
pub const PROBABILITY_FLOOR: f64 = 1e-300;

/// Probabilities above this count towards the support of `P(W)`.
pub const SUPPORT_THRESHOLD: f64 = 1e-8;

/// Which excited-state transition a quench targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Esqpt {
    First,
    Second,
}

impl Esqpt {
    /// Initial state used to reach this transition.
    pub fn initial_state(self) -> InitialState {
        match self {
            Esqpt::First => InitialState::Ground,
            Esqpt::Second => InitialState::Highest,
        }
    }

    pub fn label(self) -> u8 {
        match self {
            Esqpt::First => 1,
            Esqpt::Second => 2,
        }
    }
}

impl std::fmt::Display for Esqpt {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Esqpt::First => f.write_str("first"),
            Esqpt::Second => f.write_str("second"),
        }
    }
}

impl std::str::FromStr for Esqpt {
    type Err = AlmgError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" | "first" => Ok(Esqpt::First),
            "2" | "second" => Ok(Esqpt::Second),
            other => Err(AlmgError::Parameter(format!("unknown ESQPT '{other}', expected 1 or 2"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialState {
    Ground,
    /// Top of the parity sector.
    Highest,
    Index(usize),
}

impl InitialState {
    fn resolve(self, dim: usize) -> Result<usize> {
        match self {
            InitialState::Ground => Ok(0),
            InitialState::Highest => Ok(dim - 1),
            InitialState::Index(k) if k < dim => Ok(k),
            InitialState::Index(k) => Err(AlmgError::Parameter(format!(
                "initial index {k} out of range for sector dimension {dim}"
            ))),
        }
    }
}

impl std::str::FromStr for InitialState {
    type Err = AlmgError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ground" => Ok(InitialState::Ground),
            "highest" => Ok(InitialState::Highest),
            other => other.parse::<usize>().map(InitialState::Index).map_err(|_| {
                AlmgError::Parameter(format!(
                    "initial state must be 'ground', 'highest' or an index, got '{other}'"
                ))
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuenchSpec {
    pub gamma_i: f64,
    pub delta_gamma: f64,
    pub alpha: f64,
    pub n: usize,
    pub initial_state: InitialState,
    pub parity: Parity,
}

impl QuenchSpec {
    pub fn gamma_f(&self) -> f64 {
        self.gamma_i + self.delta_gamma
    }
}

/// The work distribution of one quench.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkDistribution {
    /// `W_k = E_k^f − E_n^i` for every final eigenstate `k`.
    pub works: Vec<f64>,
    /// `p_{k,n}`, aligned with `works`.
    pub probs: Vec<f64>,
    /// `S_W = −Σ_k p_{k,n} ln p_{k,n}`.
    pub entropy: f64,
    pub mean: f64,
    pub variance: f64,
    pub initial_index: usize,
    pub initial_energy: f64,
}

impl WorkDistribution {
    fn from_parts(works: Vec<f64>, probs: Vec<f64>, initial_index: usize, initial_energy: f64) -> Self {
        let entropy = work_entropy(&probs);
        let mean: f64 = works.iter().zip(&probs).map(|(w, p)| w * p).sum();
        let variance: f64 = works.iter().zip(&probs).map(|(w, p)| p * (w - mean).powi(2)).sum();
        Self { works, probs, entropy, mean, variance, initial_index, initial_energy }
    }

    pub fn total_probability(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Number of outcomes with `p > threshold`.
    pub fn support(&self, threshold: f64) -> usize {
        self.probs.iter().filter(|&&p| p > threshold).count()
    }

    /// `P(W)` with work values closer than `tol` merged (probabilities
    /// summed, position taken from the first member). Sorted by `W`.
    pub fn merged(&self, tol: f64) -> Vec<(f64, f64)> {
        let mut pairs: Vec<(f64, f64)> =
            self.works.iter().copied().zip(self.probs.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(pairs.len());
        for (w, p) in pairs {
            match out.last_mut() {
                Some(last) if (w - last.0).abs() <= tol => last.1 += p,
                _ => out.push((w, p)),
            }
        }
        out
    }
}

/// Shannon entropy `−Σ p ln p` with `0·ln 0 = 0` and the probability floor.
pub fn work_entropy(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p >= PROBABILITY_FLOOR)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

/// Merge tolerance for degenerate work values at size `N`.
pub fn merge_tolerance(n: usize) -> f64 {
    1e-12 * n as f64
}

/// An initial eigenstate of `H(γ_i)`, prepared once and reused across quenches.
#[derive(Clone, Debug)]
pub struct PreparedState {
    pub params: ModelParams,
    pub parity: Parity,
    pub energies: Vec<f64>,
    pub index: usize,
    pub state: Vec<f64>,
}

impl PreparedState {
    pub fn new(params: &ModelParams, parity: Parity, initial: InitialState) -> Result<Self> {
        let (_, op) = sector_hamiltonian(params, parity)?;
        let energies = eigh_tridiagonal(&op, false)?.values;
        let index = initial.resolve(energies.len())?;
        let state = eigenvector(&op, &energies, index)?;
        Ok(Self { params: *params, parity, energies, index, state })
    }

    pub fn energy(&self) -> f64 {
        self.energies[self.index]
    }

    fn final_params(&self, delta_gamma: f64) -> Result<ModelParams> {
        let gamma_f = self.params.gamma + delta_gamma;
        if !(0.0..=1.0).contains(&gamma_f) {
            return Err(AlmgError::Parameter(format!(
                "final gamma {gamma_f} = {} + {delta_gamma} leaves [0, 1]",
                self.params.gamma
            )));
        }
        self.params.with_gamma(gamma_f)
    }

    /// Work distribution of the quench `γ_i → γ_i + δγ`.
    pub fn quench(&self, delta_gamma: f64) -> Result<WorkDistribution> {
        let params_f = self.final_params(delta_gamma)?;
        let e_n = self.energy();
        if delta_gamma == 0.0 {
            let mut probs = vec![0.0; self.energies.len()];
            probs[self.index] = 1.0;
            let works = self.energies.iter().map(|e| e - e_n).collect();
            return Ok(WorkDistribution::from_parts(works, probs, self.index, e_n));
        }
        let (_, op_f) = sector_hamiltonian(&params_f, self.parity)?;
        let (energies_f, coeffs) = eigh_projected(&op_f, &[&self.state])?;
        let probs = coeffs[0].iter().map(|c| c * c).collect();
        let works = energies_f.iter().map(|e| e - e_n).collect();
        Ok(WorkDistribution::from_parts(works, probs, self.index, e_n))
    }

    /// `(⟨ψ_n^i|H_f|ψ_n^i⟩ − E_0^f)/N`.
    pub fn mean_postquench_excitation(&self, delta_gamma: f64) -> Result<f64> {
        let n = self.params.n as f64;
        if delta_gamma == 0.0 {
            return Ok((self.energy() - self.energies[0]) / n);
        }
        let params_f = self.final_params(delta_gamma)?;
        let (_, op_f) = sector_hamiltonian(&params_f, self.parity)?;
        let e0_f = eigh_tridiagonal(&op_f, false)?.values[0];
        Ok((op_f.quadratic_form(&self.state) - e0_f) / n)
    }

    /// `⟨ψ_n^i|H_f|ψ_n^i⟩ − E_n^i`, the mean work of the quench.
    pub fn expected_work(&self, delta_gamma: f64) -> Result<f64> {
        let params_f = self.final_params(delta_gamma)?;
        let (_, op_f) = sector_hamiltonian(&params_f, self.parity)?;
        Ok(op_f.quadratic_form(&self.state) - self.energy())
    }
}

fn validate_spec(spec: &QuenchSpec) -> Result<ModelParams> {
    ModelParams::reduced(spec.n, spec.gamma_i, spec.alpha)
}

/// Work distribution of a single sudden quench.
pub fn quench_distribution(spec: &QuenchSpec) -> Result<WorkDistribution> {
    let params = validate_spec(spec)?;
    PreparedState::new(&params, spec.parity, spec.initial_state)?.quench(spec.delta_gamma)
}

/// Post-quench excitation energy per particle, computed without the final
/// eigenvectors.
pub fn mean_postquench_excitation(spec: &QuenchSpec) -> Result<f64> {
    let params = validate_spec(spec)?;
    PreparedState::new(&params, spec.parity, spec.initial_state)?
        .mean_postquench_excitation(spec.delta_gamma)
}

/// Critical quench strength for one transition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalQuench {
    pub which: Esqpt,
    pub gamma_i: f64,
    pub alpha: f64,
    pub value: f64,
    /// `γ_i + δγ_c` falls outside `[0, 1]`.
    pub out_of_range: bool,
}

impl CriticalQuench {
    pub fn gamma_f(&self) -> f64 {
        self.gamma_i + self.value
    }
}

/// Mean-field critical quench `δγ_{c,1}` or `δγ_{c,2}`.
pub fn critical_quench(gamma_i: f64, alpha: f64, which: Esqpt) -> Result<CriticalQuench> {
    if !(GAMMA_C..=1.0).contains(&gamma_i) {
        return Err(AlmgError::Validity(format!(
            "critical quenches require 1/3 <= gamma_i <= 1, got gamma_i = {gamma_i}"
        )));
    }
    let (num, den) = match which {
        Esqpt::First => (
            -(3.0 * gamma_i - 1.0) * (2.0 * gamma_i - alpha),
            2.0 * (3.0 * gamma_i - 3.0 * alpha + 1.0),
        ),
        Esqpt::Second => (
            4.0 * alpha * (1.0 - gamma_i - alpha) - (1.0 - gamma_i).powi(2),
            2.0 * (2.0 * alpha + gamma_i - 1.0),
        ),
    };
    if den.abs() < 1e-12 {
        return Err(AlmgError::Singular(format!(
            "critical quench denominator vanishes for the {which} ESQPT at gamma_i = {gamma_i}, alpha = {alpha}"
        )));
    }
    let value = num / den;
    let gamma_f = gamma_i + value;
    Ok(CriticalQuench {
        which,
        gamma_i,
        alpha,
        value,
        out_of_range: !(0.0..=1.0).contains(&gamma_f),
    })
}

/// Entropy of `P_n(W)` for one initial eigenstate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelEntropy {
    pub n: usize,
    pub epsilon: f64,
    pub entropy: f64,
}

/// Full overlap-probability matrix `P[k][n] = |⟨ψ_k^f|ψ_n^i⟩|²`.
pub fn transition_matrix(initial: &ModelParams, final_: &ModelParams, parity: Parity) -> Result<Vec<Vec<f64>>> {
    let (vi, vf) = both_eigenbases(initial, final_, parity)?;
    Ok(overlap_probabilities(&vi.1, &vf.1))
}

type Eigenbasis = (Vec<f64>, Vec<Vec<f64>>);

fn eigenbasis(op: &TridiagonalOperator) -> Result<Eigenbasis> {
    let eig = eigh_tridiagonal(op, true)?;
    Ok((eig.values, eig.vectors.expect("vectors requested")))
}

fn both_eigenbases(initial: &ModelParams, final_: &ModelParams, parity: Parity) -> Result<(Eigenbasis, Eigenbasis)> {
    if initial.n != final_.n || initial.alpha != final_.alpha {
        return Err(AlmgError::Parameter("quench may only change gamma".into()));
    }
    let (_, op_i) = sector_hamiltonian(initial, parity)?;
    let (_, op_f) = sector_hamiltonian(final_, parity)?;
    let (a, b) = rayon::join(|| eigenbasis(&op_i), || eigenbasis(&op_f));
    Ok((a?, b?))
}

/// `P[k][n]` from column-stored eigenvectors.
fn overlap_probabilities(initial: &[Vec<f64>], final_: &[Vec<f64>]) -> Vec<Vec<f64>> {
    final_
        .par_iter()
        .map(|vk| {
            initial
                .iter()
                .map(|vn| {
                    let dot: f64 = vk.iter().zip(vn).map(|(a, b)| a * b).sum();
                    dot * dot
                })
                .collect()
        })
        .collect()
}

/// `S_W^{(n)}` against `ε_n` for every eigenstate of the sector at a fixed
/// small quench `δγ`.
pub fn entropy_vs_energy(
    gamma_i: f64,
    alpha: f64,
    n: usize,
    delta_gamma: f64,
    parity: Parity,
) -> Result<Vec<LevelEntropy>> {
    let params_i = ModelParams::reduced(n, gamma_i, alpha)?;
    let gamma_f = gamma_i + delta_gamma;
    if !(0.0..=1.0).contains(&gamma_f) {
        return Err(AlmgError::Parameter(format!("final gamma {gamma_f} leaves [0, 1]")));
    }
    let params_f = params_i.with_gamma(gamma_f)?;
    let nf = n as f64;
    if delta_gamma == 0.0 {
        let (_, op) = sector_hamiltonian(&params_i, parity)?;
        let e = eigh_tridiagonal(&op, false)?.values;
        return Ok(e
            .iter()
            .enumerate()
            .map(|(k, ek)| LevelEntropy { n: k, epsilon: (ek - e[0]) / nf, entropy: 0.0 })
            .collect());
    }
    let ((e_i, v_i), (_, v_f)) = both_eigenbases(&params_i, &params_f, parity)?;
    let out = v_i
        .par_iter()
        .enumerate()
        .map(|(k, psi)| {
            let probs: Vec<f64> = v_f
                .iter()
                .map(|vf| {
                    let dot: f64 = vf.iter().zip(psi).map(|(a, b)| a * b).sum();
                    dot * dot
                })
                .collect();
            LevelEntropy { n: k, epsilon: (e_i[k] - e_i[0]) / nf, entropy: work_entropy(&probs) }
        })
        .collect();
    Ok(out)
}
