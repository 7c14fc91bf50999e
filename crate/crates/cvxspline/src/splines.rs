//! B-spline bases on a uniform knot lattice over `[0, 1]`, and the
//! normalized design quantities the convex fit consumes.
//!
//! The lattice extends `degree` auxiliary knots beyond each endpoint so that
//! every knot gap is exactly `1/K`. On a uniform lattice, nonnegative second
//! differences of the coefficient vector are exactly the convexity constraint
//! on the spline, and affine functions carry arithmetic coefficient
//! sequences; clamped (repeated) boundary knots would break both properties
//! for degrees above one.
//!
//! Knot intervals follow the left-open, right-closed convention `(κ_{k-1}, κ_k]`,
//! with `x = 0` assigned to the first interval, so degree-0 bases tile `[0, 1]`
//! exactly. A basis of degree `p` on `K` intervals has `K + p` functions
//! restricted to `[0, 1]`; at any `x` at most `p + 1` of them are nonzero and
//! they sum to one.

use ndarray::{Array1, Array2};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SplineError {
    #[error("degree {0} is not supported (expected 0..=3)")]
    UnsupportedDegree(usize),
    #[error("need at least 2 knot intervals, got {0}")]
    TooFewIntervals(usize),
    #[error("evaluation point {0} lies outside [0, 1]")]
    OutOfDomain(f64),
    #[error("need at least as many observations as knot intervals ({intervals}), got {n}")]
    TooFewPoints { n: usize, intervals: usize },
}

/// Equally spaced B-spline basis on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineBasis {
    degree: usize,
    intervals: usize,
    /// Uniform knot lattice `(j - degree)/K` for `j = 0..=K + 2·degree`.
    knots: Vec<f64>,
}

impl SplineBasis {
    /// Basis of `degree` in `0..=3` on `intervals >= 2` equal knot intervals.
    pub fn new(degree: usize, intervals: usize) -> Result<Self, SplineError> {
        if degree > 3 {
            return Err(SplineError::UnsupportedDegree(degree));
        }
        if intervals < 2 {
            return Err(SplineError::TooFewIntervals(intervals));
        }
        let knots = (0..=intervals + 2 * degree)
            .map(|j| (j as f64 - degree as f64) / intervals as f64)
            .collect();
        Ok(Self { degree, intervals, knots })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    /// Number of basis functions, `intervals + degree`.
    pub fn len(&self) -> usize {
        self.intervals + self.degree
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Breakpoint positions inside the domain: `k / K` for `k = 0..=K`.
    pub fn knot_positions(&self) -> Vec<f64> {
        (0..=self.intervals)
            .map(|k| k as f64 / self.intervals as f64)
            .collect()
    }

    /// Index of the knot interval containing `x`, in `0..K`.
    fn interval_of(&self, x: f64) -> usize {
        let k = (x * self.intervals as f64).ceil() as isize - 1;
        k.clamp(0, self.intervals as isize - 1) as usize
    }

    /// Values of the `degree + 1` possibly nonzero bases at `x`, together
    /// with the index of the first one. Cox–de Boor triangle on the span
    /// containing `x`; the divisors are widths of nonempty knot ranges, so
    /// no 0/0 case arises.
    pub fn eval_nonzero(&self, x: f64) -> Result<(usize, [f64; 4]), SplineError> {
        if !(0.0..=1.0).contains(&x) {
            return Err(SplineError::OutOfDomain(x));
        }
        let p = self.degree;
        let span = self.interval_of(x) + p; // knot-vector index with t[span] <= x <= t[span+1]
        let t = &self.knots;
        let mut vals = [0.0_f64; 4];
        let mut left = [0.0_f64; 4];
        let mut right = [0.0_f64; 4];
        vals[0] = 1.0;
        for d in 1..=p {
            left[d] = x - t[span + 1 - d];
            right[d] = t[span + d] - x;
            let mut saved = 0.0;
            for r in 0..d {
                let temp = vals[r] / (right[r + 1] + left[d - r]);
                vals[r] = saved + right[r + 1] * temp;
                saved = left[d - r] * temp;
            }
            vals[d] = saved;
        }
        Ok((span - p, vals))
    }

    /// Dense basis vector of length `len()` at `x`.
    pub fn eval(&self, x: f64) -> Result<Array1<f64>, SplineError> {
        let (first, vals) = self.eval_nonzero(x)?;
        let mut out = Array1::<f64>::zeros(self.len());
        for (offset, &v) in vals.iter().take(self.degree + 1).enumerate() {
            out[first + offset] = v;
        }
        Ok(out)
    }

    /// Value of the spline with the given coefficients at `x`.
    pub fn spline_value(&self, coeffs: &Array1<f64>, x: f64) -> Result<f64, SplineError> {
        assert_eq!(coeffs.len(), self.len(), "coefficient length mismatch");
        let (first, vals) = self.eval_nonzero(x)?;
        let mut s = 0.0;
        for (offset, &v) in vals.iter().take(self.degree + 1).enumerate() {
            s += v * coeffs[first + offset];
        }
        Ok(s)
    }
}

/// Design quantities for a response observed at `x_i = i/n`, `i = 1..=n`:
/// the design matrix, the squared column norm of an interior basis used as
/// normalizer, and the normalized Gram matrix and response projection that
/// define the least-squares criterion.
#[derive(Debug, Clone)]
pub struct DesignBundle {
    /// `n × (K + p)` matrix of basis values at the design points.
    pub design: Array2<f64>,
    /// Normalizer `Σ_i B_k(x_i)²` at an interior basis column.
    pub basis_norm_sq: f64,
    /// `designᵀ design / basis_norm_sq`; banded with bandwidth `degree`.
    pub gram: Array2<f64>,
    /// `designᵀ y / basis_norm_sq`.
    pub ybar: Array1<f64>,
}

/// Assemble the design for `y` observed at the equispaced points `i/n`.
/// Only products of bases with overlapping support are accumulated, so the
/// Gram matrix has exact zeros outside the band `|i - j| <= degree`.
pub fn build_design(basis: &SplineBasis, y: &[f64]) -> Result<DesignBundle, SplineError> {
    let n = y.len();
    if n < basis.intervals() {
        return Err(SplineError::TooFewPoints { n, intervals: basis.intervals() });
    }
    let m = basis.len();
    let p = basis.degree();
    let mut design = Array2::<f64>::zeros((n, m));
    let mut xtx = Array2::<f64>::zeros((m, m));
    let mut xty = Array1::<f64>::zeros(m);
    for i in 1..=n {
        let x = i as f64 / n as f64;
        let (first, vals) = basis.eval_nonzero(x).expect("design points lie in [0, 1]");
        for a in 0..=p {
            let va = vals[a];
            design[[i - 1, first + a]] = va;
            xty[first + a] += va * y[i - 1];
            for b in a..=p {
                xtx[[first + a, first + b]] += va * vals[b];
            }
        }
    }
    for i in 0..m {
        for j in 0..i {
            xtx[[i, j]] = xtx[[j, i]];
        }
    }
    // Interior basis columns (the (p+1)-th through K-th) all carry the same
    // squared norm when K divides n; the first of them is the normalizer.
    // Degrees that crowd out every interior column fall back to the largest
    // column norm.
    let basis_norm_sq = if basis.intervals() >= p + 1 {
        xtx[[p, p]]
    } else {
        (0..m).map(|k| xtx[[k, k]]).fold(0.0_f64, f64::max)
    };
    let gram = &xtx / basis_norm_sq;
    let ybar = &xty / basis_norm_sq;
    Ok(DesignBundle { design, basis_norm_sq, gram, ybar })
}
