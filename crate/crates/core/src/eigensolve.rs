//! Full-spectrum eigendecomposition of real symmetric tridiagonal matrices.
//!
//! The solver is the implicit-shift QL iteration with Wilkinson-type shifts.
//! Besides the usual "values only" and "values plus vectors" modes it can
//! carry a set of probe vectors through the same Givens rotations, which
//! yields the probes' coefficients in the eigenbasis at `O(dim²)` cost per
//! probe instead of the `O(dim³)` needed for the full eigenvector matrix.

use serde::{Deserialize, Serialize};

use crate::error::{AlmgError, Result};
use crate::spinmodel::{sector_hamiltonian, ModelParams, Parity, SpinSector, TridiagonalOperator};

/// Maximum QL sweeps spent on any single eigenvalue.
pub const MAX_SWEEPS: usize = 50;

/// Receives the Givens rotations of the QL sweep.
trait RotationSink {
    /// Apply the rotation acting on eigenbasis slots `i` and `i + 1`.
    fn rotate(&mut self, i: usize, c: f64, s: f64);
    fn permute(&mut self, order: &[usize]);
}

struct NoSink;

impl RotationSink for NoSink {
    fn rotate(&mut self, _: usize, _: f64, _: f64) {}
    fn permute(&mut self, _: &[usize]) {}
}

/// Eigenvector matrix stored column by column.
struct Columns(Vec<Vec<f64>>);

impl RotationSink for Columns {
    fn rotate(&mut self, i: usize, c: f64, s: f64) {
        let (left, right) = self.0.split_at_mut(i + 1);
        let zi = &mut left[i];
        let zj = &mut right[0];
        for (a, b) in zi.iter_mut().zip(zj.iter_mut()) {
            let f = *b;
            *b = s * *a + c * f;
            *a = c * *a - s * f;
        }
    }

    fn permute(&mut self, order: &[usize]) {
        let mut old: Vec<Option<Vec<f64>>> = self.0.drain(..).map(Some).collect();
        self.0 = order.iter().map(|&k| old[k].take().unwrap()).collect();
    }
}

/// Probe vectors `w = Zᵀψ`; `Z ← ZG` on columns `i, i+1` maps to the same
/// update on entries `i, i+1` of each `w`.
struct Probes(Vec<Vec<f64>>);

impl RotationSink for Probes {
    fn rotate(&mut self, i: usize, c: f64, s: f64) {
        for w in &mut self.0 {
            let f = w[i + 1];
            w[i + 1] = s * w[i] + c * f;
            w[i] = c * w[i] - s * f;
        }
    }

    fn permute(&mut self, order: &[usize]) {
        for w in &mut self.0 {
            *w = order.iter().map(|&k| w[k]).collect();
        }
    }
}

fn ql_implicit<S: RotationSink>(op: &TridiagonalOperator, sink: &mut S) -> Result<Vec<f64>> {
    let n = op.dim();
    let mut d = op.diag.clone();
    let mut e = op.offdiag.clone();
    e.push(0.0);

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            if iter == MAX_SWEEPS {
                return Err(AlmgError::NoConvergence { index: l, iterations: iter });
            }
            iter += 1;

            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                sink.rotate(i, c, s);
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    sink.permute(&order);
    Ok(order.iter().map(|&k| d[k]).collect())
}

/// Eigenpairs of a tridiagonal operator, ascending.
#[derive(Clone, Debug, PartialEq)]
pub struct TridiagonalEigen {
    pub values: Vec<f64>,
    /// `vectors[k]` is the normalized eigenvector for `values[k]`.
    pub vectors: Option<Vec<Vec<f64>>>,
}

/// Complete eigendecomposition of `op`.
pub fn eigh_tridiagonal(op: &TridiagonalOperator, want_vectors: bool) -> Result<TridiagonalEigen> {
    if want_vectors {
        let n = op.dim();
        let mut cols = Columns(
            (0..n)
                .map(|k| {
                    let mut v = vec![0.0; n];
                    v[k] = 1.0;
                    v
                })
                .collect(),
        );
        let values = ql_implicit(op, &mut cols)?;
        Ok(TridiagonalEigen { values, vectors: Some(cols.0) })
    } else {
        let values = ql_implicit(op, &mut NoSink)?;
        Ok(TridiagonalEigen { values, vectors: None })
    }
}

/// Eigenvalues together with the eigenbasis coefficients of each probe:
/// `coefficients[p][k] = ⟨v_k|probe_p⟩`.
pub fn eigh_projected(
    op: &TridiagonalOperator,
    probes: &[&[f64]],
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = op.dim();
    if let Some(bad) = probes.iter().find(|p| p.len() != n) {
        return Err(AlmgError::Parameter(format!(
            "probe of length {} for operator of dimension {n}",
            bad.len()
        )));
    }
    let mut sink = Probes(probes.iter().map(|p| p.to_vec()).collect());
    let values = ql_implicit(op, &mut sink)?;
    Ok((values, sink.0))
}

/// Solves `(A − σ) x = b` in place for a tridiagonal `A`, by Gaussian
/// elimination with partial pivoting. Zero pivots are replaced by `tiny`.
fn shifted_solve(op: &TridiagonalOperator, sigma: f64, tiny: f64, b: &mut [f64]) {
    let n = op.dim();
    let mut d: Vec<f64> = op.diag.iter().map(|x| x - sigma).collect();
    let mut dl = op.offdiag.clone();
    let mut du = op.offdiag.clone();
    let mut du2 = vec![0.0; n.saturating_sub(2)];
    let mut swapped = vec![false; n.saturating_sub(1)];

    for i in 0..n.saturating_sub(1) {
        if d[i].abs() >= dl[i].abs() {
            if d[i] == 0.0 {
                d[i] = tiny;
            }
            let fact = dl[i] / d[i];
            dl[i] = fact;
            d[i + 1] -= fact * du[i];
        } else {
            let fact = d[i] / dl[i];
            d[i] = dl[i];
            dl[i] = fact;
            let temp = du[i];
            du[i] = d[i + 1];
            d[i + 1] = temp - fact * d[i + 1];
            if i + 2 < n {
                du2[i] = du[i + 1];
                du[i + 1] = -fact * du[i + 1];
            }
            swapped[i] = true;
        }
    }
    if d[n - 1] == 0.0 {
        d[n - 1] = tiny;
    }

    for i in 0..n.saturating_sub(1) {
        if swapped[i] {
            let temp = b[i];
            b[i] = b[i + 1];
            b[i + 1] = temp - dl[i] * b[i + 1];
        } else {
            b[i + 1] -= dl[i] * b[i];
        }
    }
    for i in (0..n).rev() {
        let mut acc = b[i];
        if i + 1 < n {
            acc -= du[i] * b[i + 1];
        }
        if i + 2 < n {
            acc -= du2[i] * b[i + 2];
        }
        b[i] = acc / d[i];
    }
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
}

fn residual(op: &TridiagonalOperator, lambda: f64, v: &[f64]) -> f64 {
    op.matvec(v)
        .iter()
        .zip(v)
        .map(|(hv, x)| (hv - lambda * x).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Eigenvector for the `index`-th smallest eigenvalue, by inverse iteration.
///
/// Falls back to the full QL decomposition when inverse iteration does not
/// reach a residual of `1e-11 ‖A‖` (clustered eigenvalues).
pub fn eigenvector(op: &TridiagonalOperator, values: &[f64], index: usize) -> Result<Vec<f64>> {
    let n = op.dim();
    if index >= n || values.len() != n {
        return Err(AlmgError::Parameter(format!(
            "eigenvalue index {index} out of range for dimension {n}"
        )));
    }
    let lambda = values[index];
    let scale = op.norm_inf().max(f64::MIN_POSITIVE);
    let tiny = f64::EPSILON * scale;
    // deterministic, generically non-orthogonal start
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i as f64) * 0.618_033_988_75).fract()).collect();
    normalize(&mut v);
    for _ in 0..4 {
        shifted_solve(op, lambda, tiny, &mut v);
        normalize(&mut v);
        if residual(op, lambda, &v) <= 1e-11 * scale {
            return Ok(v);
        }
    }
    let full = eigh_tridiagonal(op, true)?;
    Ok(full.vectors.unwrap().swap_remove(index))
}

/// Spectrum of one parity sector at fixed `(N, γ, α)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub params: ModelParams,
    pub sector: SpinSector,
    /// Raw (extensive) eigenvalues `E_n`, ascending.
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Option<Vec<Vec<f64>>>,
}

impl Spectrum {
    pub fn compute(params: &ModelParams, parity: Parity, want_vectors: bool) -> Result<Self> {
        let (sector, op) = sector_hamiltonian(params, parity)?;
        let eig = eigh_tridiagonal(&op, want_vectors)?;
        Ok(Self {
            params: *params,
            sector,
            eigenvalues: eig.values,
            eigenvectors: eig.vectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn ground_energy(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// `ε_n = (E_n − E_0)/N`.
    pub fn excitation_energies(&self) -> Vec<f64> {
        excitation_energies(self)
    }

    /// Mean spacing of the rescaled levels, `(ε_max − ε_0)/(dim − 1)`.
    pub fn mean_level_spacing(&self) -> f64 {
        let n = self.dim();
        if n < 2 {
            return 0.0;
        }
        (self.eigenvalues[n - 1] - self.eigenvalues[0]) / (self.params.n as f64 * (n - 1) as f64)
    }

    /// Largest `‖Hv − λv‖` over the stored eigenpairs.
    pub fn max_residual(&self, op: &TridiagonalOperator) -> Option<f64> {
        let vecs = self.eigenvectors.as_ref()?;
        Some(
            vecs.iter()
                .zip(&self.eigenvalues)
                .map(|(v, &l)| residual(op, l, v))
                .fold(0.0, f64::max),
        )
    }

    /// Largest deviation of `VᵀV` from the identity.
    pub fn orthonormality_error(&self) -> Option<f64> {
        let vecs = self.eigenvectors.as_ref()?;
        let mut worst: f64 = 0.0;
        for (a, va) in vecs.iter().enumerate() {
            for (b, vb) in vecs.iter().enumerate().skip(a) {
                let dot: f64 = va.iter().zip(vb).map(|(x, y)| x * y).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - want).abs());
            }
        }
        Some(worst)
    }
}

/// Rescaled excitation energies `ε_n = (E_n − E_0)/N`; `ε_0 = 0` exactly.
pub fn excitation_energies(spec: &Spectrum) -> Vec<f64> {
    let e0 = spec.ground_energy();
    let n = spec.params.n as f64;
    spec.eigenvalues.iter().map(|e| (e - e0) / n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_analytic() {
        let p = ModelParams::reduced(2, 0.5, 0.0).unwrap();
        let s = Spectrum::compute(&p, Parity::Even, true).unwrap();
        let r = 0.3125f64.sqrt();
        assert!((s.eigenvalues[0] - (1.25 - r)).abs() < 1e-14);
        assert!((s.eigenvalues[1] - (1.25 + r)).abs() < 1e-14);
        assert!((s.eigenvalues[0] - 0.690983).abs() < 1e-6);
        assert!((s.eigenvalues[1] - 1.809017).abs() < 1e-6);
    }

    #[test]
    fn constant_diagonal() {
        let op = TridiagonalOperator::new(vec![2.5; 6], vec![0.0; 5]).unwrap();
        let eig = eigh_tridiagonal(&op, true).unwrap();
        assert!(eig.values.iter().all(|&v| v == 2.5));
        let vecs = eig.vectors.unwrap();
        for (k, v) in vecs.iter().enumerate() {
            for (i, x) in v.iter().enumerate() {
                assert_eq!(*x, if i == k { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn one_by_one() {
        let op = TridiagonalOperator::new(vec![-3.0], vec![]).unwrap();
        let eig = eigh_tridiagonal(&op, true).unwrap();
        assert_eq!(eig.values, vec![-3.0]);
        assert_eq!(eig.vectors.unwrap(), vec![vec![1.0]]);
    }

    #[test]
    fn rescaled_ground_is_zero() {
        let p = ModelParams::new(60, 0.7, 0.5).unwrap();
        let s = Spectrum::compute(&p, Parity::Even, false).unwrap();
        let eps = s.excitation_energies();
        assert_eq!(eps[0], 0.0);
        assert!(eps.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn projected_matches_full_vectors() {
        let p = ModelParams::new(80, 0.55, 0.4).unwrap();
        let (_, op) = sector_hamiltonian(&p, Parity::Even).unwrap();
        let full = eigh_tridiagonal(&op, true).unwrap();
        let probe: Vec<f64> = (0..op.dim()).map(|i| ((i * 7 % 5) as f64) - 2.0).collect();
        let (vals, coeffs) = eigh_projected(&op, &[&probe]).unwrap();
        assert_eq!(vals, full.values);
        for (k, v) in full.vectors.unwrap().iter().enumerate() {
            let dot: f64 = v.iter().zip(&probe).map(|(a, b)| a * b).sum();
            assert!((dot - coeffs[0][k]).abs() < 1e-11, "k={k}");
        }
    }

    #[test]
    fn inverse_iteration_vectors() {
        let p = ModelParams::new(400, 0.7, 0.5).unwrap();
        let (_, op) = sector_hamiltonian(&p, Parity::Even).unwrap();
        let vals = eigh_tridiagonal(&op, false).unwrap().values;
        for idx in [0, 57, vals.len() - 1] {
            let v = eigenvector(&op, &vals, idx).unwrap();
            assert!(residual(&op, vals[idx], &v) <= 1e-9 * op.norm_inf());
        }
        assert!(eigenvector(&op, &vals, vals.len()).is_err());
    }

    #[test]
    fn inverse_iteration_degenerate_falls_back() {
        let op = TridiagonalOperator::new(vec![1.0, 1.0, 2.0], vec![0.0, 0.0]).unwrap();
        let vals = eigh_tridiagonal(&op, false).unwrap().values;
        let v = eigenvector(&op, &vals, 2).unwrap();
        assert!((v[2].abs() - 1.0).abs() < 1e-12);
    }
}
