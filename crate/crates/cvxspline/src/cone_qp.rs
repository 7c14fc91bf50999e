//! Quadratic programming over the cone of coefficient vectors with
//! nonnegative second differences.
//!
//! The problem minimized is `½ bᵀΛb − bᵀȳ` over `Ω = {b : Δ²b ≥ 0}`, where
//! `Λ` is a normalized Gram matrix and `ȳ` the matching response projection.
//! Membership in `Ω` makes the spline with coefficients `b` convex.
//!
//! Optimality is characterized without forming multipliers explicitly: with
//! `C` the unit lower-triangular all-ones matrix, `(C²)_{kj} = k − j + 1` for
//! `j ≤ k`, and `g = Λb − ȳ`, the minimizer is the unique feasible `b` with
//!
//! * `Δ²b ≥ 0`, `(C²g)_k ≥ 0` for `k ≤ m − 2`, and `⟨Δ²b, (C²g)⟩ = 0`,
//! * `Σ_i g_i = 0` and `Σ_i (m − i + 1) g_i = 0`.
//!
//! The last two equalities say `g` is orthogonal to the affine lineality of
//! the cone; the first block is complementary slackness against the truncated
//! double prefix sum of `g`, which coincides with the multiplier vector. All
//! five residuals are packaged in [`KktCertificate`].
//!
//! The working-set subproblems are solved through a selection matrix `F_α`
//! whose transpose linearly interpolates the free coefficients across runs of
//! active constraints; `F_α Λ F_αᵀ` is small and positive definite and is
//! factored densely.

use crate::linalg::{condition_1norm, Cholesky};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::Serialize;
use thiserror::Error;

/// Relative tolerance used by the solver and certificate unless overridden.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Condition-estimate ceiling above which a compressed system is rejected.
const MAX_CONDITION: f64 = 1e12;

/// Largest dimension the exhaustive oracle will accept (2^(m−2) subsets).
const MAX_ORACLE_DIM: usize = 12;

#[derive(Debug, Error)]
pub enum QpError {
    #[error("cone problems need at least 3 coefficients, got {0}")]
    DimensionTooSmall(usize),
    #[error("gram matrix is {rows}x{cols} but the target has length {len}")]
    ShapeMismatch { rows: usize, cols: usize, len: usize },
    #[error("gram matrix is not positive definite")]
    GramNotPositiveDefinite,
    #[error("compressed system is numerically singular (condition estimate {0:.3e})")]
    IllConditioned(f64),
    #[error("iteration cap {cap} reached without certification (max residual {residual:.3e})")]
    NotCertified {
        cap: usize,
        residual: f64,
        /// Best iterate found, with its failing certificate.
        best: Box<ConeSolution>,
    },
    #[error("exhaustive enumeration supports at most {MAX_ORACLE_DIM} coefficients, got {0}")]
    TooLargeForEnumeration(usize),
    #[error("no active set produced a certified solution during enumeration")]
    EnumerationFailed,
}

/// Quadratic program data: positive definite `gram` and target vector `ybar`.
#[derive(Debug, Clone)]
pub struct ConeProblem {
    pub gram: Array2<f64>,
    pub ybar: Array1<f64>,
}

impl ConeProblem {
    pub fn new(gram: Array2<f64>, ybar: Array1<f64>) -> Result<Self, QpError> {
        let p = Self { gram, ybar };
        p.validate()?;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.ybar.len()
    }

    fn validate(&self) -> Result<(), QpError> {
        let m = self.ybar.len();
        if self.gram.nrows() != m || self.gram.ncols() != m {
            return Err(QpError::ShapeMismatch {
                rows: self.gram.nrows(),
                cols: self.gram.ncols(),
                len: m,
            });
        }
        if m < 3 {
            return Err(QpError::DimensionTooSmall(m));
        }
        Ok(())
    }

    /// Objective `½ bᵀΛb − bᵀȳ`.
    pub fn objective(&self, b: &ArrayView1<f64>) -> f64 {
        0.5 * b.dot(&self.gram.dot(b)) - b.dot(&self.ybar)
    }

    fn scale(&self) -> f64 {
        self.ybar.iter().fold(1.0_f64, |a, v| a.max(v.abs()))
    }
}

/// The five optimality residuals; all are nonnegative and a certified
/// solution drives each below the (scaled) tolerance.
#[derive(Debug, Clone, Serialize)]
pub struct KktCertificate {
    /// Largest violation of `Δ²b ≥ 0`.
    pub primal_violation: f64,
    /// Largest negativity of the multiplier vector `(C²(Λb − ȳ))_{1..m−2}`.
    pub dual_violation: f64,
    /// `|⟨Δ²b, multipliers⟩|`.
    pub complementarity_gap: f64,
    /// `|Σ_i (Λb − ȳ)_i|`.
    pub gradient_sum: f64,
    /// `|Σ_i (m − i + 1)(Λb − ȳ)_i|`.
    pub weighted_gradient_sum: f64,
    /// Data scale `max(1, ‖ȳ‖_∞)` the tolerance is relative to.
    pub scale: f64,
    pub tol: f64,
}

impl KktCertificate {
    /// True when every residual is below the scaled tolerance. The
    /// complementarity gap is quadratic in the data and compares against the
    /// squared scale.
    pub fn passes(&self) -> bool {
        let s = self.scale;
        self.primal_violation <= self.tol * s
            && self.dual_violation <= self.tol * s
            && self.complementarity_gap <= self.tol * s * s
            && self.gradient_sum <= self.tol * s
            && self.weighted_gradient_sum <= self.tol * s
    }

    /// Largest residual after removing the scale (the gap is divided by an
    /// extra scale factor so all five are comparable).
    pub fn max_residual(&self) -> f64 {
        let s = self.scale;
        (self.primal_violation / s)
            .max(self.dual_violation / s)
            .max(self.complementarity_gap / (s * s))
            .max(self.gradient_sum / s)
            .max(self.weighted_gradient_sum / s)
    }
}

/// Solver output: coefficients, the geometric active set (constraints whose
/// second difference vanished at tolerance), the certificate, and the number
/// of working-set changes performed.
#[derive(Debug, Clone)]
pub struct ConeSolution {
    pub coeffs: Array1<f64>,
    /// Indices `i` (0-based rows of the second-difference matrix) with
    /// `(Δ²b)_i` within tolerance of zero.
    pub active: Vec<usize>,
    pub certificate: KktCertificate,
    pub iterations: usize,
    pub certified: bool,
}

/// The `(m−2) × m` matrix with rows `(…, 1, −2, 1, …)` mapping coefficients
/// to second differences.
pub fn second_difference_matrix(m: usize) -> Result<Array2<f64>, QpError> {
    if m < 3 {
        return Err(QpError::DimensionTooSmall(m));
    }
    let mut d = Array2::<f64>::zeros((m - 2, m));
    for i in 0..(m - 2) {
        d[[i, i]] = 1.0;
        d[[i, i + 1]] = -2.0;
        d[[i, i + 2]] = 1.0;
    }
    Ok(d)
}

fn second_differences(b: &ArrayView1<f64>) -> Vec<f64> {
    let m = b.len();
    (0..m - 2).map(|i| b[i] - 2.0 * b[i + 1] + b[i + 2]).collect()
}

/// Generators of the cone `{Δ²b ≥ 0}` in the order `±v¹, ±v², v³, …, vᵐ`:
/// the first two pairs span the affine lineality (`v¹ + v² = 1`), and
/// `Δ²vᵏ = e_{k−2}`. Every `b` decomposes as
/// `b = b₁v¹ + b₂v² + Σ_k (Δ²b)_k vᵏ`, with nonnegative weights on the
/// one-sided generators exactly when `b` is feasible.
pub fn cone_generators(m: usize) -> Result<Vec<Array1<f64>>, QpError> {
    if m < 3 {
        return Err(QpError::DimensionTooSmall(m));
    }
    let mut gens = Vec::with_capacity(m + 2);
    let v1 = Array1::from_shape_fn(m, |i| if i == 0 { 1.0 } else { 1.0 - i as f64 });
    let v2 = Array1::from_shape_fn(m, |i| i as f64);
    gens.push(v1.clone());
    gens.push(-&v1);
    gens.push(v2.clone());
    gens.push(-&v2);
    for k in 3..=m {
        gens.push(Array1::from_shape_fn(m, |i| {
            if i + 2 <= k { 0.0 } else { (i + 2 - k) as f64 }
        }));
    }
    Ok(gens)
}

/// Multiplier vector and lineality residuals from the gradient `g = Λb − ȳ`:
/// returns (`(C²g)_{1..m−2}`, `Σg`, `Σ(m−i+1)g_i`), computed as truncated
/// double prefix sums.
fn dual_quantities(g: &ArrayView1<f64>) -> (Vec<f64>, f64, f64) {
    let m = g.len();
    let mut s1 = vec![0.0_f64; m];
    let mut s2 = vec![0.0_f64; m];
    let mut acc1 = 0.0;
    let mut acc2 = 0.0;
    for i in 0..m {
        acc1 += g[i];
        s1[i] = acc1;
        acc2 += acc1;
        s2[i] = acc2;
    }
    (s2[..m - 2].to_vec(), s1[m - 1], s2[m - 1])
}

/// Evaluate the five optimality residuals for an arbitrary iterate.
pub fn kkt_certificate(problem: &ConeProblem, coeffs: &ArrayView1<f64>, tol: f64) -> KktCertificate {
    let d2b = second_differences(coeffs);
    let g = problem.gram.dot(coeffs) - &problem.ybar;
    let (mu, gsum, wsum) = dual_quantities(&g.view());
    let primal = d2b.iter().fold(0.0_f64, |a, &v| a.max(-v));
    let dual = mu.iter().fold(0.0_f64, |a, &v| a.max(-v));
    let gap = d2b.iter().zip(&mu).map(|(a, b)| a * b).sum::<f64>().abs();
    KktCertificate {
        primal_violation: primal,
        dual_violation: dual,
        complementarity_gap: gap,
        gradient_sum: gsum.abs(),
        weighted_gradient_sum: wsum.abs(),
        scale: problem.scale(),
        tol,
    }
}

/// Selection matrix `F_α` for an active set `α` of second-difference
/// constraints (0-based indices into `0..m−2`, in any order).
///
/// Consecutive active constraints form runs; a run over constraints `s..=e`
/// forces coefficients `s..=e+2` onto a line. Runs whose coefficient spans
/// share an endpoint merge into a single block with an interior breakpoint
/// at the shared coefficient. Each block contributes one row per breakpoint:
/// the row is 1 at its breakpoint and decays linearly to 0 at the adjacent
/// breakpoints, so `F_αᵀ b̃` interpolates the compressed values linearly and
/// every active second difference of the result vanishes. Coefficients not
/// covered by any run keep a singleton row. `F_α` has `m − |α|` rows, full
/// row rank, and its rows sum to the all-ones vector.
pub fn selection_rows(active: &[usize], m: usize) -> Array2<f64> {
    let (blocks, n_active) = breakpoint_blocks(active, m);
    let l = m - n_active;
    let mut f = Array2::<f64>::zeros((l, m));
    let mut block_iter = blocks.iter().peekable();
    let mut row = 0;
    let mut c = 0;
    while c < m {
        if let Some(knots) = block_iter.peek().filter(|k| k[0] == c) {
            for (j, &t) in knots.iter().enumerate() {
                f[[row + j, t]] = 1.0;
                if j + 1 < knots.len() {
                    let h = knots[j + 1] - t;
                    for i in 1..h {
                        let w = i as f64 / h as f64;
                        f[[row + j, t + i]] = 1.0 - w;
                        f[[row + j + 1, t + i]] = w;
                    }
                }
            }
            row += knots.len();
            c = *knots.last().expect("blocks are nonempty") + 1;
            block_iter.next();
        } else {
            f[[row, c]] = 1.0;
            row += 1;
            c += 1;
        }
    }
    debug_assert_eq!(row, l);
    f
}

/// Decompose an active set into blocks of tied coefficients. Each block is
/// the list of its breakpoint coefficient indices (at least two, consecutive
/// gaps at least two); returns the blocks in increasing coefficient order
/// together with the deduplicated active-constraint count.
pub fn breakpoint_blocks(active: &[usize], m: usize) -> (Vec<Vec<usize>>, usize) {
    assert!(m >= 3, "need at least 3 coefficients");
    let mut idx: Vec<usize> = active.to_vec();
    idx.sort_unstable();
    idx.dedup();
    assert!(
        idx.last().is_none_or(|&i| i + 2 < m),
        "active constraint index out of range"
    );
    // Maximal runs of consecutive constraint indices; a run s..=e ties
    // coefficients s..=e+2.
    let mut runs: Vec<(usize, usize)> = Vec::new();
    for &i in &idx {
        match runs.last_mut() {
            Some((_, e)) if *e + 1 == i => *e = i,
            _ => runs.push((i, i)),
        }
    }
    // Runs whose coefficient spans share an endpoint merge into one block
    // with an interior breakpoint at the shared coefficient.
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for &(s, e) in &runs {
        match blocks.last_mut() {
            Some(knots) if *knots.last().expect("blocks are nonempty") == s => knots.push(e + 2),
            _ => blocks.push(vec![s, e + 2]),
        }
    }
    (blocks, idx.len())
}

/// Map `ȳ` to the minimizer of the working-set subproblem:
/// `G_α = F_αᵀ (F_α Λ F_αᵀ)⁻¹ F_α`.
pub fn solution_operator(
    f: &ArrayView2<f64>,
    gram: &ArrayView2<f64>,
) -> Result<Array2<f64>, QpError> {
    let t = f.dot(gram).dot(&f.t());
    let chol = Cholesky::new(&t.view()).map_err(|_| QpError::GramNotPositiveDefinite)?;
    let cond = condition_1norm(&t.view(), &chol);
    if cond > MAX_CONDITION {
        return Err(QpError::IllConditioned(cond));
    }
    let z = chol.solve_mat(&f.view());
    Ok(f.t().dot(&z))
}

fn restricted_minimizer(
    problem: &ConeProblem,
    working: &[bool],
) -> Result<Array1<f64>, QpError> {
    let m = problem.dim();
    let active: Vec<usize> = (0..working.len()).filter(|&i| working[i]).collect();
    if active.is_empty() {
        let chol = Cholesky::new(&problem.gram.view())
            .map_err(|_| QpError::GramNotPositiveDefinite)?;
        return Ok(chol.solve(&problem.ybar.view()));
    }
    let f = selection_rows(&active, m);
    let t = f.dot(&problem.gram).dot(&f.t());
    let chol = Cholesky::new(&t.view()).map_err(|_| QpError::GramNotPositiveDefinite)?;
    let z = chol.solve(&f.dot(&problem.ybar).view());
    Ok(f.t().dot(&z))
}

fn geometric_active(d2b: &[f64], eps: f64) -> Vec<usize> {
    (0..d2b.len()).filter(|&i| d2b[i].abs() <= eps).collect()
}

/// Primal active-set solve of `min ½bᵀΛb − bᵀȳ` over `Δ²b ≥ 0`.
///
/// Starts from the unconstrained minimizer and alternates two moves, each
/// taken at the current working-set minimizer: add the most violated
/// inactive constraint while the iterate is infeasible, and drop the most
/// negative multiplier once it is feasible. Ties break toward the lowest
/// index. The iteration cap is `10·m`; hitting it returns the best feasible
/// iterate seen wrapped in [`QpError::NotCertified`].
pub fn solve(problem: &ConeProblem, tol: f64) -> Result<ConeSolution, QpError> {
    problem.validate()?;
    let m = problem.dim();
    let eps = tol * problem.scale();
    let cap = 10 * m;
    let mut working = vec![false; m - 2];
    let mut coeffs = restricted_minimizer(problem, &working)?;
    let mut iterations = 0usize;
    let mut best: Option<(f64, Array1<f64>)> = None;

    loop {
        let d2b = second_differences(&coeffs.view());
        let mut add: Option<(usize, f64)> = None;
        for (i, &v) in d2b.iter().enumerate() {
            if !working[i] && v < -eps && add.is_none_or(|(_, worst)| v < worst) {
                add = Some((i, v));
            }
        }
        if add.is_none() {
            // Feasible; remember the best iterate in case we never certify.
            let obj = problem.objective(&coeffs.view());
            if best.as_ref().is_none_or(|(b, _)| obj < *b) {
                best = Some((obj, coeffs.clone()));
            }
        }

        let step = match add {
            Some((i, _)) => Some((i, true)),
            None => {
                let g = problem.gram.dot(&coeffs) - &problem.ybar;
                let (mu, _, _) = dual_quantities(&g.view());
                let mut drop: Option<(usize, f64)> = None;
                for (i, &v) in mu.iter().enumerate() {
                    if working[i] && v < -eps && drop.is_none_or(|(_, worst)| v < worst) {
                        drop = Some((i, v));
                    }
                }
                drop.map(|(i, _)| (i, false))
            }
        };

        match step {
            None => {
                let certificate = kkt_certificate(problem, &coeffs.view(), tol);
                let active = geometric_active(&d2b, eps);
                return Ok(ConeSolution {
                    coeffs,
                    active,
                    certificate,
                    iterations,
                    certified: true,
                });
            }
            Some((i, insert)) => {
                if iterations >= cap {
                    let final_coeffs = best.map(|(_, b)| b).unwrap_or(coeffs);
                    let certificate = kkt_certificate(problem, &final_coeffs.view(), tol);
                    let residual = certificate.max_residual();
                    let active =
                        geometric_active(&second_differences(&final_coeffs.view()), eps);
                    return Err(QpError::NotCertified {
                        cap,
                        residual,
                        best: Box::new(ConeSolution {
                            coeffs: final_coeffs,
                            active,
                            certificate,
                            iterations,
                            certified: false,
                        }),
                    });
                }
                working[i] = insert;
                iterations += 1;
                coeffs = restricted_minimizer(problem, &working)?;
            }
        }
    }
}

/// Reference solver: try every active set, minimize on it, and return the
/// first candidate whose certificate passes. Exponential in `m`, so the
/// dimension is capped; meant as an independent cross-check for [`solve`].
pub fn enumerate_oracle(problem: &ConeProblem, tol: f64) -> Result<ConeSolution, QpError> {
    problem.validate()?;
    let m = problem.dim();
    if m > MAX_ORACLE_DIM {
        return Err(QpError::TooLargeForEnumeration(m));
    }
    let eps = tol * problem.scale();
    let n_constraints = m - 2;
    let mut best: Option<ConeSolution> = None;
    for mask in 0u32..(1u32 << n_constraints) {
        let working: Vec<bool> = (0..n_constraints).map(|i| mask >> i & 1 == 1).collect();
        let coeffs = restricted_minimizer(problem, &working)?;
        let certificate = kkt_certificate(problem, &coeffs.view(), tol);
        let candidate = ConeSolution {
            active: geometric_active(&second_differences(&coeffs.view()), eps),
            certified: certificate.passes(),
            coeffs,
            certificate,
            iterations: mask.count_ones() as usize,
        };
        if candidate.certified {
            return Ok(candidate);
        }
        if best
            .as_ref()
            .is_none_or(|b| candidate.certificate.max_residual() < b.certificate.max_residual())
        {
            best = Some(candidate);
        }
    }
    Err(best
        .map(|b| QpError::NotCertified {
            cap: 1 << n_constraints,
            residual: b.certificate.max_residual(),
            best: Box::new(b),
        })
        .unwrap_or(QpError::EnumerationFailed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn identity_problem(ybar: Array1<f64>) -> ConeProblem {
        let m = ybar.len();
        ConeProblem::new(Array2::eye(m), ybar).unwrap()
    }

    fn random_spline_problem(rng: &mut ChaCha8Rng, m: usize) -> ConeProblem {
        // Gram matrix from a degree-1 design, target from noisy data.
        let kn = m - 1;
        let n = kn * rng.random_range(4..=32);
        let basis = crate::splines::SplineBasis::new(1, kn).unwrap();
        let y: Vec<f64> = (1..=n)
            .map(|i| {
                let x = i as f64 / n as f64;
                let bend: f64 = rng.random_range(-2.0..2.0);
                bend * (x - 0.5).powi(2) + rng.random_range(-0.5..0.5)
            })
            .collect();
        let bundle = crate::splines::build_design(&basis, &y).unwrap();
        ConeProblem::new(bundle.gram, bundle.ybar).unwrap()
    }

    #[test]
    fn second_difference_matrix_shape_and_kernel() {
        let d = second_difference_matrix(5).unwrap();
        assert_eq!(d.nrows(), 3);
        assert_eq!(d.row(0).to_vec(), vec![1.0, -2.0, 1.0, 0.0, 0.0]);
        assert_eq!(d.row(2).to_vec(), vec![0.0, 0.0, 1.0, -2.0, 1.0]);
        // Affine sequences are annihilated.
        let affine = Array1::from_shape_fn(5, |i| 3.0 - 0.7 * i as f64);
        assert!(d.dot(&affine).iter().all(|v| v.abs() < 1e-14));
        assert!(matches!(second_difference_matrix(2), Err(QpError::DimensionTooSmall(2))));
    }

    #[test]
    fn generators_match_closed_form() {
        let gens = cone_generators(4).unwrap();
        assert_eq!(gens.len(), 6);
        assert_eq!(gens[0].to_vec(), vec![1.0, 0.0, -1.0, -2.0]);
        assert_eq!(gens[2].to_vec(), vec![0.0, 1.0, 2.0, 3.0]);
        assert_eq!(gens[4].to_vec(), vec![0.0, 0.0, 1.0, 2.0]);
        assert_eq!(gens[5].to_vec(), vec![0.0, 0.0, 0.0, 1.0]);
        // v¹ + v² is the all-ones vector.
        let ones = &gens[0] + &gens[2];
        assert!(ones.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn generators_are_feasible_and_hit_unit_second_differences() {
        let m = 7;
        let d = second_difference_matrix(m).unwrap();
        let gens = cone_generators(m).unwrap();
        for (gi, v) in gens.iter().enumerate() {
            let d2 = d.dot(v);
            assert!(
                d2.iter().all(|&x| x >= -1e-14),
                "generator {gi} leaves the cone: {d2:?}"
            );
        }
        for k in 3..=m {
            let d2 = d.dot(&gens[k + 1]);
            for i in 0..m - 2 {
                let want = if i == k - 3 { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(d2[i], want, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn every_vector_reconstructs_from_generators() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for m in 3..=9 {
            let gens = cone_generators(m).unwrap();
            for _ in 0..20 {
                let b = Array1::from_shape_fn(m, |_| rng.random_range(-3.0..3.0));
                let mut rebuilt = &gens[0] * b[0] + &gens[2] * b[1];
                for k in 3..=m {
                    let d2 = b[k - 1] - 2.0 * b[k - 2] + b[k - 3];
                    rebuilt = rebuilt + &gens[k + 1] * d2;
                }
                for i in 0..m {
                    assert_abs_diff_eq!(rebuilt[i], b[i], epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn feasible_target_is_returned_unchanged() {
        let problem = identity_problem(array![1.0, 0.0, 1.0]);
        let sol = solve(&problem, DEFAULT_TOL).unwrap();
        assert_eq!(sol.iterations, 0);
        assert!(sol.active.is_empty());
        assert!(sol.certified);
        for i in 0..3 {
            assert_abs_diff_eq!(sol.coeffs[i], problem.ybar[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn concave_spike_projects_to_its_mean() {
        // Projection of (0, 1, 0) onto the cone is the constant vector 1/3,
        // with multiplier vector (1/3) on the single constraint.
        let problem = identity_problem(array![0.0, 1.0, 0.0]);
        let sol = solve(&problem, DEFAULT_TOL).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(sol.coeffs[i], 1.0 / 3.0, epsilon = 1e-12);
        }
        assert_eq!(sol.active, vec![0]);
        assert!(sol.certificate.passes());
        let g = problem.gram.dot(&sol.coeffs) - &problem.ybar;
        let (mu, gsum, wsum) = dual_quantities(&g.view());
        assert_abs_diff_eq!(mu[0], 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(gsum, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(wsum, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn certificate_rejects_perturbed_solutions() {
        let problem = identity_problem(array![0.0, 1.0, 0.0]);
        let sol = solve(&problem, DEFAULT_TOL).unwrap();
        let mut bad = sol.coeffs.clone();
        bad[0] += 0.1;
        let cert = kkt_certificate(&problem, &bad.view(), DEFAULT_TOL);
        assert!(!cert.passes());
    }

    #[test]
    fn solution_is_positively_homogeneous() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let problem = random_spline_problem(&mut rng, 8);
        let base = solve(&problem, DEFAULT_TOL).unwrap();
        for &t in &[0.5, 2.0, 10.0] {
            let scaled = ConeProblem::new(problem.gram.clone(), &problem.ybar * t).unwrap();
            let sol = solve(&scaled, DEFAULT_TOL).unwrap();
            for i in 0..problem.dim() {
                assert_abs_diff_eq!(sol.coeffs[i], t * base.coeffs[i], epsilon = 1e-9 * t.max(1.0));
            }
        }
    }

    #[test]
    fn solve_matches_enumeration_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for m in 3..=8 {
            for _ in 0..10 {
                let problem = random_spline_problem(&mut rng, m);
                let fast = solve(&problem, DEFAULT_TOL).unwrap();
                let slow = enumerate_oracle(&problem, DEFAULT_TOL).unwrap();
                for i in 0..m {
                    assert_abs_diff_eq!(fast.coeffs[i], slow.coeffs[i], epsilon = 1e-8);
                }
            }
        }
    }

    #[test]
    fn selection_rows_match_worked_example() {
        // One active constraint at index 0 with m = 5 ties the first three
        // coefficients to a line through the outer two.
        let f = selection_rows(&[0], 5);
        let want = [
            [1.0, 0.5, 0.0, 0.0, 0.0],
            [0.0, 0.5, 1.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 0.0, 1.0],
        ];
        assert_eq!(f.nrows(), 4);
        for i in 0..4 {
            for j in 0..5 {
                assert_abs_diff_eq!(f[[i, j]], want[i][j], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn selection_rows_identity_without_active_constraints() {
        let f = selection_rows(&[], 6);
        assert_eq!(f, Array2::<f64>::eye(6));
    }

    #[test]
    fn selection_rows_merge_touching_runs() {
        // Runs {0,1} and {3,4} on m = 8 cover coefficients 0..=3 and 3..=6;
        // the shared coefficient 3 becomes an interior breakpoint.
        let f = selection_rows(&[0, 1, 3, 4], 8);
        assert_eq!(f.nrows(), 4);
        for j in 0..8 {
            let col: f64 = f.column(j).sum();
            assert_abs_diff_eq!(col, 1.0, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(f[[0, 0]], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f[[1, 3]], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f[[2, 6]], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f[[3, 7]], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f[[0, 2]], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f[[1, 2]], 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn interpolated_coefficients_satisfy_active_constraints() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cases: Vec<(usize, Vec<usize>)> = vec![
            (6, vec![1]),
            (8, vec![0, 1, 3, 4]),
            (9, vec![2, 3, 4]),
            (10, vec![0, 4, 5, 7]),
            (12, vec![0, 1, 2, 5, 6, 9]),
        ];
        for (m, active) in cases {
            let f = selection_rows(&active, m);
            assert_eq!(f.nrows(), m - active.len());
            for _ in 0..5 {
                let z = Array1::from_shape_fn(f.nrows(), |_| rng.random_range(-2.0..2.0));
                let b = f.t().dot(&z);
                for &i in &active {
                    let d2 = b[i] - 2.0 * b[i + 1] + b[i + 2];
                    assert!(d2.abs() < 1e-12, "active constraint {i} not satisfied");
                }
            }
            // Rows sum to the all-ones vector.
            for j in 0..m {
                assert_abs_diff_eq!(f.column(j).sum(), 1.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn solution_operator_reduces_to_inverse_without_constraints() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let problem = random_spline_problem(&mut rng, 6);
        let f = selection_rows(&[], 6);
        let g = solution_operator(&f.view(), &problem.gram.view()).unwrap();
        let inv = Cholesky::new(&problem.gram.view()).unwrap().inverse();
        for i in 0..6 {
            for j in 0..6 {
                assert_abs_diff_eq!(g[[i, j]], inv[[i, j]], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn solution_operator_is_locally_linear_around_strict_optima() {
        let problem = identity_problem(array![0.0, 1.0, 0.0, 0.9]);
        let sol = solve(&problem, DEFAULT_TOL).unwrap();
        assert!(!sol.active.is_empty());
        let f = selection_rows(&sol.active, 4);
        let g = solution_operator(&f.view(), &problem.gram.view()).unwrap();
        let predicted = g.dot(&problem.ybar);
        for i in 0..4 {
            assert_abs_diff_eq!(predicted[i], sol.coeffs[i], epsilon = 1e-10);
        }
        // A small perturbation keeps the same face, so the operator stays exact.
        let nudged = &problem.ybar + &array![0.01, -0.02, 0.015, 0.01];
        let moved = solve(&ConeProblem::new(problem.gram.clone(), nudged.clone()).unwrap(), DEFAULT_TOL)
            .unwrap();
        let predicted = g.dot(&nudged);
        for i in 0..4 {
            assert_abs_diff_eq!(predicted[i], moved.coeffs[i], epsilon = 1e-10);
        }
    }

    #[test]
    fn solution_operator_rejects_near_singular_systems() {
        let gram = array![[1.0, 0.0, 0.0], [0.0, 1e-15, 0.0], [0.0, 0.0, 1.0]];
        let f = selection_rows(&[], 3);
        assert!(matches!(
            solution_operator(&f.view(), &gram.view()),
            Err(QpError::IllConditioned(_))
        ));
    }

    #[test]
    fn oracle_rejects_large_problems() {
        let problem = identity_problem(Array1::zeros(13));
        assert!(matches!(
            enumerate_oracle(&problem, DEFAULT_TOL),
            Err(QpError::TooLargeForEnumeration(13))
        ));
    }

    #[test]
    fn certified_solutions_pass_their_own_certificate() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..25 {
            let m = rng.random_range(4..=12);
            let problem = random_spline_problem(&mut rng, m);
            let sol = solve(&problem, DEFAULT_TOL).unwrap();
            assert!(sol.certificate.passes(), "residuals: {:?}", sol.certificate);
            // Feasibility of the reported coefficients.
            let d2b = second_differences(&sol.coeffs.view());
            assert!(d2b.iter().all(|&v| v >= -1e-9 * sol.certificate.scale));
        }
    }
}
