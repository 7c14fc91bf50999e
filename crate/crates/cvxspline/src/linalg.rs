//! Small dense linear algebra kernels: Cholesky factorization, symmetric
//! eigenvalues via cyclic Jacobi, and a deterministic pairwise sum.
//!
//! The matrices this crate factors are normalized Gram matrices and their
//! selection-matrix compressions, symmetric positive definite and of moderate
//! order (a few hundred at most), so unblocked kernels are adequate and keep
//! the dependency set small.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    /// A pivot fell below the positivity tolerance during factorization.
    #[error("matrix is not positive definite (pivot {pivot:.3e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    /// Jacobi sweeps did not drive the off-diagonal mass below tolerance.
    #[error("eigenvalue iteration failed to converge after {0} sweeps")]
    NoConvergence(usize),
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Array2<f64>,
}

impl Cholesky {
    /// Factor `a = L Lᵀ`. Only the lower triangle of `a` is read.
    pub fn new(a: &ArrayView2<f64>) -> Result<Self, LinalgError> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "matrix must be square");
        let mut l = Array2::<f64>::zeros((n, n));
        for j in 0..n {
            let mut d = a[[j, j]];
            for k in 0..j {
                d -= l[[j, k]] * l[[j, k]];
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(LinalgError::NotPositiveDefinite { index: j, pivot: d });
            }
            let dj = d.sqrt();
            l[[j, j]] = dj;
            for i in (j + 1)..n {
                let mut s = a[[i, j]];
                for k in 0..j {
                    s -= l[[i, k]] * l[[j, k]];
                }
                l[[i, j]] = s / dj;
            }
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// Solve `A x = b` via forward and back substitution.
    pub fn solve(&self, b: &ArrayView1<f64>) -> Array1<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let mut x = b.to_owned();
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self.l[[i, k]] * x[k];
            }
            x[i] = s / self.l[[i, i]];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= self.l[[k, i]] * x[k];
            }
            x[i] = s / self.l[[i, i]];
        }
        x
    }

    /// Solve `A X = B` column by column.
    pub fn solve_mat(&self, b: &ArrayView2<f64>) -> Array2<f64> {
        let n = self.dim();
        assert_eq!(b.nrows(), n);
        let mut out = Array2::<f64>::zeros(b.raw_dim());
        for (j, col) in b.columns().into_iter().enumerate() {
            out.column_mut(j).assign(&self.solve(&col));
        }
        out
    }

    /// Inverse of the factored matrix.
    pub fn inverse(&self) -> Array2<f64> {
        let n = self.dim();
        self.solve_mat(&Array2::<f64>::eye(n).view())
    }
}

/// One-norm condition estimate `‖A‖₁ ‖A⁻¹‖₁`, with the inverse formed
/// explicitly. Intended for the small compressed systems only.
pub fn condition_1norm(a: &ArrayView2<f64>, chol: &Cholesky) -> f64 {
    one_norm(a) * one_norm(&chol.inverse().view())
}

fn one_norm(a: &ArrayView2<f64>) -> f64 {
    let mut best = 0.0_f64;
    for col in a.columns() {
        best = best.max(col.iter().map(|v| v.abs()).sum());
    }
    best
}

/// Maximum absolute row sum.
pub fn inf_norm(a: &ArrayView2<f64>) -> f64 {
    let mut best = 0.0_f64;
    for row in a.rows() {
        best = best.max(row.iter().map(|v| v.abs()).sum());
    }
    best
}

/// All eigenvalues of a symmetric matrix, ascending, by cyclic Jacobi
/// rotations. Quadratic convergence makes a fixed sweep cap safe at the
/// orders used here.
pub fn symmetric_eigenvalues(a: &ArrayView2<f64>) -> Result<Vec<f64>, LinalgError> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix must be square");
    if n == 0 {
        return Ok(vec![]);
    }
    if n == 1 {
        return Ok(vec![a[[0, 0]]]);
    }
    let mut m = a.to_owned();
    let scale: f64 = m
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let max_sweeps = 64;
    for _ in 0..max_sweeps {
        let mut off = 0.0_f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[[i, j]] * m[[i, j]];
            }
        }
        if off.sqrt() <= 1e-15 * scale * n as f64 {
            let mut eig: Vec<f64> = (0..n).map(|i| m[[i, i]]).collect();
            eig.sort_by(|a, b| a.partial_cmp(b).expect("eigenvalues are finite"));
            return Ok(eig);
        }
        for p in 0..(n - 1) {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq.abs() <= 1e-18 * scale {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
            }
        }
    }
    Err(LinalgError::NoConvergence(max_sweeps))
}

/// Pairwise (cascade) summation. Deterministic for a fixed input order and
/// far less prone to cancellation drift than a running sum, which keeps
/// Monte Carlo reductions bit-reproducible across thread counts.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        let mut s = 0.0;
        for &x in xs {
            s += x;
        }
        return s;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Arithmetic mean via pairwise summation.
pub fn pairwise_mean(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty());
    pairwise_sum(xs) / xs.len() as f64
}
