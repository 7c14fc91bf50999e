//! Convex spline estimators: fixed-smoothness fits, two smoothness-adaptive
//! procedures, and a residual-based noise estimator.
//!
//! Throughout, data `y` are modeled as a convex function observed at the
//! equispaced points `x_i = i/n` plus centered noise with standard deviation
//! `σ`. For smoothness `r` (first derivative Hölder of order `r − 1`, with
//! constant `L`) and known `σ`, the knot count balancing approximation and
//! noise is `(L/σ)^{2/(2r+1)} (n/log n)^{1/(2r+1)}` under sup-norm loss and
//! `(L/σ)^{2/(2r+1)} n^{1/(2r+1)}` for estimation at a fixed interior point.
//!
//! When `r` is unknown, [`adapt_sup`] fits a short grid of candidate
//! smoothness levels and picks the largest one whose fit stays within a
//! threshold band of every rougher fit, and [`adapt_point`] scans dyadic bin
//! widths with a one-sided curvature statistic and interpolates binned means
//! at the first width where curvature is no longer detectable.

use crate::cone_qp::{
    self, selection_rows, solution_operator, ConeProblem, ConeSolution, KktCertificate, QpError,
};
use crate::linalg::inf_norm;
use crate::splines::{build_design, SplineBasis, SplineError};
use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

/// Multiplier `(1 + √2)/2` applied to the threshold sequence when comparing
/// grid fits in [`adapt_sup`].
pub const SUP_COMPARISON_FACTOR: f64 = 1.2071067811865475;

/// Smallest admissible pointwise threshold multiplier: the one-sided normal
/// tail above it must stay below 1/4 for the level search to terminate at
/// the right scale.
pub const MIN_LAMBDA: f64 = 0.675;

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error(transparent)]
    Spline(#[from] SplineError),
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error("smoothness index {0} outside the supported range [1, 4]")]
    InvalidSmoothness(f64),
    #[error("scale constant must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("noise level must be positive and finite, got {0}")]
    InvalidNoise(f64),
    #[error("threshold multiplier {0} below the admissible minimum 0.675")]
    InvalidLambda(f64),
    #[error("bin count {k} does not divide the sample size {n}")]
    BinSize { n: usize, k: usize },
    #[error("need at least {need} observations, got {n}")]
    SampleTooSmall { n: usize, need: usize },
    #[error("evaluation point {0} must lie strictly inside (0, 1)")]
    PointOutsideDomain(f64),
    #[error(
        "x0 = {x0} is too close to the boundary for the bin offsets at level {level} \
         (bin {d} of {kn})"
    )]
    BoundaryCollision { x0: f64, level: usize, kn: usize, d: usize },
}

/// Loss geometry a knot-count rule targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RiskMode {
    SupNorm,
    Pointwise,
}

/// How the adaptive procedures obtained their fit.
#[derive(Debug, Clone, Serialize)]
pub enum Provenance {
    /// Fit at explicitly chosen knot count and degree.
    Direct,
    /// Fixed-smoothness fit through the optimal knot-count rule.
    FixedR { r: f64 },
    /// Sup-norm grid comparison selected `r_hat`.
    AdaptiveSup { r_hat: f64 },
    /// Dyadic pointwise search stopped at this level.
    Pointwise { level: usize },
    /// Least squares without the convexity constraint.
    Unconstrained,
}

/// A fitted spline: basis, coefficient vector, and fit metadata.
#[derive(Debug, Clone)]
pub struct FittedSpline {
    pub basis: SplineBasis,
    pub coeffs: Array1<f64>,
    pub provenance: Provenance,
    /// Noise level the procedure used, when it used one.
    pub sigma_used: Option<f64>,
    /// Optimality certificate of the constrained solve; `None` for
    /// unconstrained fits.
    pub certificate: Option<KktCertificate>,
}

impl FittedSpline {
    /// Spline value at `x`.
    pub fn value(&self, x: f64) -> Result<f64, SplineError> {
        self.basis.spline_value(&self.coeffs, x)
    }

    /// Values on an equispaced grid of `points` covering `[0, 1]`.
    pub fn values_on_grid(&self, points: usize) -> Vec<f64> {
        assert!(points >= 2);
        (0..points)
            .map(|g| {
                let x = g as f64 / (points - 1) as f64;
                self.value(x).expect("grid point lies in [0, 1]")
            })
            .collect()
    }

    /// Smallest second difference of the coefficients; nonnegative (up to
    /// tolerance) exactly when the spline is convex.
    pub fn min_second_difference(&self) -> f64 {
        let b = &self.coeffs;
        (0..b.len() - 2)
            .map(|i| b[i] - 2.0 * b[i + 1] + b[i + 2])
            .fold(f64::INFINITY, f64::min)
    }
}

/// Degree used for smoothness `r`: `max(1, ⌈r − 1⌉)`, capped at cubic.
pub fn degree_for(r: f64) -> usize {
    ((r - 1.0).ceil() as usize).clamp(1, 3)
}

fn check_r(r: f64) -> Result<(), EstimateError> {
    if !(1.0..=4.0).contains(&r) {
        return Err(EstimateError::InvalidSmoothness(r));
    }
    Ok(())
}

fn check_scale(l: f64) -> Result<(), EstimateError> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(EstimateError::InvalidScale(l));
    }
    Ok(())
}

fn check_sigma(sigma: f64) -> Result<(), EstimateError> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(EstimateError::InvalidNoise(sigma));
    }
    Ok(())
}

/// Rate-optimal knot count for known smoothness, rounded to the nearest
/// integer in `[3, n]`.
pub fn optimal_knots(
    r: f64,
    l: f64,
    sigma: f64,
    n: usize,
    mode: RiskMode,
) -> Result<usize, EstimateError> {
    check_r(r)?;
    check_scale(l)?;
    check_sigma(sigma)?;
    if n < 3 {
        return Err(EstimateError::SampleTooSmall { n, need: 3 });
    }
    let exponent = 1.0 / (2.0 * r + 1.0);
    let effective = match mode {
        RiskMode::SupNorm => n as f64 / (n as f64).ln(),
        RiskMode::Pointwise => n as f64,
    };
    let k = (l / sigma).powf(2.0 * exponent) * effective.powf(exponent);
    if !k.is_finite() {
        return Ok(n);
    }
    Ok((k.round() as usize).clamp(3, n))
}

/// Convex fit at an explicit knot count and degree.
pub fn fit_convex(
    y: &[f64],
    kn: usize,
    degree: usize,
    tol: f64,
) -> Result<FittedSpline, EstimateError> {
    let (fit, _) = fit_convex_solution(y, kn, degree, tol, Provenance::Direct)?;
    Ok(fit)
}

fn fit_convex_solution(
    y: &[f64],
    kn: usize,
    degree: usize,
    tol: f64,
    provenance: Provenance,
) -> Result<(FittedSpline, ConeSolution), EstimateError> {
    let basis = SplineBasis::new(degree, kn)?;
    let bundle = build_design(&basis, y)?;
    let problem = ConeProblem::new(bundle.gram, bundle.ybar)?;
    let solution = cone_qp::solve(&problem, tol)?;
    let fit = FittedSpline {
        basis,
        coeffs: solution.coeffs.clone(),
        provenance,
        sigma_used: None,
        certificate: Some(solution.certificate.clone()),
    };
    Ok((fit, solution))
}

/// Convex fit with the knot count chosen by [`optimal_knots`] for known
/// smoothness `r`, Hölder constant `l`, and noise level `sigma`.
pub fn fit_fixed_r(
    y: &[f64],
    r: f64,
    l: f64,
    sigma: f64,
    mode: RiskMode,
) -> Result<FittedSpline, EstimateError> {
    let n = y.len();
    let kn = optimal_knots(r, l, sigma, n, mode)?.min(n.max(6) / 2);
    let mut fit = fit_convex(y, kn, degree_for(r), cone_qp::DEFAULT_TOL)?;
    fit.provenance = Provenance::FixedR { r };
    fit.sigma_used = Some(sigma);
    Ok(fit)
}

/// Least-squares spline fit without the convexity constraint.
pub fn fit_unconstrained(y: &[f64], kn: usize, degree: usize) -> Result<FittedSpline, EstimateError> {
    let basis = SplineBasis::new(degree, kn)?;
    let bundle = build_design(&basis, y)?;
    let chol = crate::linalg::Cholesky::new(&bundle.gram.view())
        .map_err(|_| EstimateError::Qp(QpError::GramNotPositiveDefinite))?;
    let coeffs = chol.solve(&bundle.ybar.view());
    Ok(FittedSpline {
        basis,
        coeffs,
        provenance: Provenance::Unconstrained,
        sigma_used: None,
        certificate: None,
    })
}

/// Residual-based variance estimate `‖y − f̂(x)‖²/n` at the design points.
pub fn sigma_mle(y: &[f64], fit: &FittedSpline) -> f64 {
    let n = y.len();
    let sq: Vec<f64> = (1..=n)
        .map(|i| {
            let x = i as f64 / n as f64;
            let r = y[i - 1] - fit.value(x).expect("design point lies in [0, 1]");
            r * r
        })
        .collect();
    crate::linalg::pairwise_mean(&sq)
}

/// Largest absolute difference between two fitted splines on `[0, 1]`.
/// Exact for degrees at most one (the difference is piecewise linear, so the
/// maximum sits at a knot of either fit); higher degrees are scanned on a
/// dense grid of `1000 × max(K)` points.
pub fn sup_distance(a: &FittedSpline, b: &FittedSpline) -> f64 {
    let mut points: Vec<f64>;
    if a.basis.degree() <= 1 && b.basis.degree() <= 1 {
        points = a.basis.knot_positions();
        points.extend(b.basis.knot_positions());
    } else {
        let dense = 1000 * a.basis.intervals().max(b.basis.intervals());
        points = (0..=dense).map(|g| g as f64 / dense as f64).collect();
    }
    points
        .iter()
        .map(|&x| {
            (a.value(x).expect("point lies in [0, 1]") - b.value(x).expect("point lies in [0, 1]"))
                .abs()
        })
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Sup-norm adaptation.
// ---------------------------------------------------------------------------

/// Noise specification for the adaptive procedures.
#[derive(Debug, Clone, Copy, Serialize)]
pub enum SigmaSpec {
    Known(f64),
    /// Plug in the residual estimate from a pilot fit with `⌈n^{1/3}⌉` knots.
    Estimate,
}

/// Configuration for [`adapt_sup`] and [`adapt_point`].
#[derive(Debug, Clone, Serialize)]
pub struct AdaptiveConfig {
    /// Hölder constant of the smoothness class.
    pub l: f64,
    pub sigma: SigmaSpec,
    /// Bias constant of the threshold sequence; calibrated from a pilot when
    /// absent.
    pub c1: Option<f64>,
    /// Noise constant of the threshold sequence; calibrated from a pilot
    /// when absent.
    pub c2: Option<f64>,
    /// Pointwise threshold multiplier, at least [`MIN_LAMBDA`].
    pub lambda: f64,
    /// Safety cap on the smoothness grid resolution.
    pub sup_grid_cap: usize,
    /// Safety cap on the number of dyadic levels examined.
    pub dyadic_level_cap: usize,
    /// Recorded in traces so downstream reports can tie results to the data
    /// seed that produced them.
    pub seed: u64,
    pub tol: f64,
}

impl AdaptiveConfig {
    pub fn new(l: f64) -> Self {
        Self {
            l,
            sigma: SigmaSpec::Estimate,
            c1: None,
            c2: None,
            lambda: 0.7,
            sup_grid_cap: 64,
            dyadic_level_cap: 32,
            seed: 0,
            tol: cone_qp::DEFAULT_TOL,
        }
    }

    fn validate(&self) -> Result<(), EstimateError> {
        check_scale(self.l)?;
        if self.lambda < MIN_LAMBDA {
            return Err(EstimateError::InvalidLambda(self.lambda));
        }
        if let SigmaSpec::Known(s) = self.sigma {
            check_sigma(s)?;
        }
        Ok(())
    }
}

/// Smoothness grid `r_j = 1 + j/τ`, `j = 0..=τ`, with `τ = ⌈√(log n)⌉`.
pub fn lepski_grid(n: usize) -> Result<Vec<f64>, EstimateError> {
    if n < 3 {
        return Err(EstimateError::SampleTooSmall { n, need: 3 });
    }
    Ok(grid_with_tau(grid_tau(n)))
}

fn grid_tau(n: usize) -> usize {
    (n as f64).ln().sqrt().ceil() as usize
}

fn grid_with_tau(tau: usize) -> Vec<f64> {
    (0..=tau).map(|j| 1.0 + j as f64 / tau as f64).collect()
}

/// Unrounded knot count at which the two summands of [`psi`] balance:
/// `(r √(2(2r+1)) c1 L / (c2 σ))^{2/(2r+1)} (n / log n)^{1/(2r+1)}`.
pub fn knots_for_rate(r: f64, n: usize, c1: f64, c2: f64, l: f64, sigma: f64) -> f64 {
    let ln_n = (n as f64).ln();
    let base = r * (2.0 * (2.0 * r + 1.0)).sqrt() * c1 * l / (c2 * sigma);
    base.powf(2.0 / (2.0 * r + 1.0)) * (n as f64 / ln_n).powf(1.0 / (2.0 * r + 1.0))
}

/// Threshold sequence for the sup-norm comparison rule: the sup-norm risk
/// envelope `c1 L K^{−r} + √(2/(2r+1)) c2 σ √(K log n / n)` evaluated at the
/// balancing knot count [`knots_for_rate`].
pub fn psi(r: f64, n: usize, c1: f64, c2: f64, l: f64, sigma: f64) -> f64 {
    let k = knots_for_rate(r, n, c1, c2, l, sigma);
    let ln_n = (n as f64).ln();
    c1 * l * k.powf(-r)
        + (2.0 / (2.0 * r + 1.0)).sqrt() * c2 * sigma * (k * ln_n / n as f64).sqrt()
}

/// Pilot fit quantities shared by the adaptive procedures.
struct Pilot {
    fit: FittedSpline,
    sigma_hat: f64,
    /// Default noise constant: `‖G_α‖_∞` at the pilot's active set over the
    /// square root of the pilot's normalizer density `β_n K / n`.
    c2_default: f64,
}

fn pilot_fit(y: &[f64], tol: f64) -> Result<Pilot, EstimateError> {
    let n = y.len();
    let kn = ((n as f64).powf(1.0 / 3.0).ceil() as usize).clamp(2, n / 2);
    let basis = SplineBasis::new(1, kn)?;
    let bundle = build_design(&basis, y)?;
    let c_beta = bundle.basis_norm_sq * kn as f64 / n as f64;
    let problem = ConeProblem::new(bundle.gram.clone(), bundle.ybar)?;
    let solution = cone_qp::solve(&problem, tol)?;
    let f = selection_rows(&solution.active, basis.len());
    let g = solution_operator(&f.view(), &bundle.gram.view())?;
    let fit = FittedSpline {
        basis,
        coeffs: solution.coeffs,
        provenance: Provenance::Direct,
        sigma_used: None,
        certificate: Some(solution.certificate),
    };
    let sigma_hat = sigma_mle(y, &fit).sqrt();
    let c2_default = inf_norm(&g.view()) / c_beta.sqrt();
    Ok(Pilot { fit, sigma_hat, c2_default })
}

/// Default bias constant: refit the pilot curve (noise-free) at the
/// sup-norm-optimal knot count for the smoothest grid point and measure how
/// much of it that coarser spline loses, relative to `L K^{−2}`.
fn calibrate_c1(
    y_len: usize,
    pilot: &Pilot,
    l: f64,
    sigma: f64,
    tol: f64,
) -> Result<f64, EstimateError> {
    let n = y_len;
    let k_cal = optimal_knots(2.0, l, sigma, n, RiskMode::SupNorm)?.min(n.max(6) / 2);
    let presmoothed: Vec<f64> = (1..=n)
        .map(|i| pilot.fit.value(i as f64 / n as f64).expect("design point"))
        .collect();
    let cal = fit_convex(&presmoothed, k_cal, 1, tol)?;
    let proxy = sup_distance(&cal, &pilot.fit);
    let c1 = proxy / (l * (k_cal as f64).powi(-2));
    Ok(c1.clamp(0.05, 20.0))
}

/// Trace of the sup-norm adaptation: grid, knot counts, thresholds, pairwise
/// distances, and the selected index.
#[derive(Debug, Clone, Serialize)]
pub struct SupTrace {
    pub r_grid: Vec<f64>,
    pub kn: Vec<usize>,
    pub psi: Vec<f64>,
    pub threshold_factor: f64,
    /// `distances[k][j]`, `j <= k`: sup distance between grid fits `k` and `j`.
    pub distances: Vec<Vec<f64>>,
    pub k_hat: usize,
    pub r_hat: f64,
    pub sigma: f64,
    pub c1: f64,
    pub c2: f64,
    pub seed: u64,
}

/// Sup-norm adaptive convex fit.
///
/// Fits every grid smoothness once at its balancing knot count, then selects
/// the largest grid index whose fit stays within `(1+√2)/2 · ψ_j` of every
/// fit at index `j` below it. Index 0 satisfies the condition vacuously, so
/// the rule always selects something.
pub fn adapt_sup(y: &[f64], cfg: &AdaptiveConfig) -> Result<(FittedSpline, SupTrace), EstimateError> {
    cfg.validate()?;
    let n = y.len();
    if n < 8 {
        return Err(EstimateError::SampleTooSmall { n, need: 8 });
    }
    let pilot = pilot_fit(y, cfg.tol)?;
    let sigma = match cfg.sigma {
        SigmaSpec::Known(s) => s,
        SigmaSpec::Estimate => pilot.sigma_hat,
    };
    // Exactly interpolable data make the formulas degenerate; a tiny floor
    // keeps the knot rule finite without affecting any noisy regime.
    let scale = y.iter().fold(1.0_f64, |a, &v| a.max(v.abs()));
    let sigma_eff = sigma.max(1e-10 * scale);
    let c2 = match cfg.c2 {
        Some(v) => v,
        None => pilot.c2_default,
    };
    let c1 = match cfg.c1 {
        Some(v) => v,
        None => calibrate_c1(n, &pilot, cfg.l, sigma_eff, cfg.tol)?,
    };
    let tau = grid_tau(n).min(cfg.sup_grid_cap).max(1);
    let r_grid = grid_with_tau(tau);
    let kn: Vec<usize> = r_grid
        .iter()
        .map(|&r| {
            let k = knots_for_rate(r, n, c1, c2, cfg.l, sigma_eff);
            if k.is_finite() {
                (k.round() as usize).clamp(3, n / 2)
            } else {
                n / 2
            }
        })
        .collect();
    let psi_vals: Vec<f64> = r_grid
        .iter()
        .map(|&r| psi(r, n, c1, c2, cfg.l, sigma_eff))
        .collect();
    let fits: Vec<FittedSpline> = kn
        .par_iter()
        .map(|&k| fit_convex(y, k, 1, cfg.tol))
        .collect::<Result<_, _>>()?;
    let distances: Vec<Vec<f64>> = (0..fits.len())
        .map(|k| (0..=k).map(|j| sup_distance(&fits[k], &fits[j])).collect())
        .collect();
    let admissible = |k: usize| -> bool {
        (0..=k).all(|j| distances[k][j] <= SUP_COMPARISON_FACTOR * psi_vals[j])
    };
    let k_hat = (0..fits.len()).rev().find(|&k| admissible(k)).unwrap_or(0);
    let r_hat = r_grid[k_hat];
    let mut fit = fits[k_hat].clone();
    fit.provenance = Provenance::AdaptiveSup { r_hat };
    fit.sigma_used = Some(sigma_eff);
    let trace = SupTrace {
        r_grid,
        kn,
        psi: psi_vals,
        threshold_factor: SUP_COMPARISON_FACTOR,
        distances,
        k_hat,
        r_hat,
        sigma: sigma_eff,
        c1,
        c2,
        seed: cfg.seed,
    };
    Ok((fit, trace))
}

// ---------------------------------------------------------------------------
// Pointwise adaptation.
// ---------------------------------------------------------------------------

/// Bin count at dyadic level `j`: `round(2^j n^{1/5})`.
pub fn dyadic_bin_count(n: usize, j: usize) -> usize {
    ((1u64 << j) as f64 * (n as f64).powf(0.2)).round() as usize
}

/// Means of `k` consecutive equal-size bins; `k` must divide `y.len()`.
pub fn binned_means(y: &[f64], k: usize) -> Result<Vec<f64>, EstimateError> {
    let n = y.len();
    if k == 0 || n % k != 0 {
        return Err(EstimateError::BinSize { n, k });
    }
    let m = n / k;
    Ok((0..k)
        .map(|b| y[b * m..(b + 1) * m].iter().sum::<f64>() / m as f64)
        .collect())
}

/// Design-point average positions of the bins: with `m = n/k` points per
/// bin, bin `b` (1-based) sits at `((b−1)m + (m+1)/2)/n`.
pub fn zeta_points(n: usize, k: usize) -> Result<Vec<f64>, EstimateError> {
    if k == 0 || n % k != 0 {
        return Err(EstimateError::BinSize { n, k });
    }
    Ok(zeta_with(n / k, k, n))
}

/// Bin centers when only the first `m·k` of `denom` design points are used.
fn zeta_with(m: usize, k: usize, denom: usize) -> Vec<f64> {
    (1..=k)
        .map(|b| ((b - 1) as f64 * m as f64 + (m as f64 + 1.0) / 2.0) / denom as f64)
        .collect()
}

/// Convex projection of bin means: the degree-0 fit is a cone projection
/// with identity Gram matrix.
pub fn convex_fit_p0(means: &[f64], tol: f64) -> Result<ConeSolution, EstimateError> {
    let m = means.len();
    let problem = ConeProblem::new(Array2::eye(m), Array1::from(means.to_vec()))?;
    Ok(cone_qp::solve(&problem, tol)?)
}

/// One dyadic level of the pointwise search.
#[derive(Debug, Clone, Serialize)]
pub struct LevelRecord {
    pub level: usize,
    pub kn: usize,
    /// Observations actually binned (`n` truncated to a multiple of `kn`).
    pub used_n: usize,
    /// Levels with fewer than 8 bins cannot form the curvature statistic for
    /// any location and are skipped.
    pub skipped: bool,
    /// 1-based bin index with `ζ_d < x0 ≤ ζ_{d+1}`.
    pub d: Option<usize>,
    /// Difference of one-step bin-mean increments four bins above and two
    /// bins below `x0`.
    pub statistic: Option<f64>,
    pub threshold: f64,
    pub triggered: bool,
    /// Interpolated estimate at `x0` for this level's binning.
    pub estimate: Option<f64>,
}

/// Trace of the dyadic pointwise search.
#[derive(Debug, Clone, Serialize)]
pub struct PointwiseTrace {
    pub x0: f64,
    pub sigma: f64,
    pub lambda: f64,
    pub levels: Vec<LevelRecord>,
    pub selected_level: usize,
    /// No level triggered; the estimate comes from the deepest level.
    pub capped: bool,
    pub seed: u64,
}

/// Result of [`adapt_point`]: the estimate, the selected level's convex
/// binned fit, and the full search trace.
#[derive(Debug, Clone)]
pub struct PointwiseEstimate {
    pub value: f64,
    pub fit: FittedSpline,
    pub trace: PointwiseTrace,
}

fn interpolate(zeta: &[f64], values: &Array1<f64>, d: usize, x0: f64) -> f64 {
    // d is 1-based with ζ_d < x0 ≤ ζ_{d+1}.
    let (z0, z1) = (zeta[d - 1], zeta[d]);
    let (v0, v1) = (values[d - 1], values[d]);
    v0 + (x0 - z0) / (z1 - z0) * (v1 - v0)
}

/// Pointwise adaptive estimate at an interior point `x0`.
///
/// Level `j` bins the data into `round(2^j n^{1/5})` bins and compares the
/// local increment difference `Δȳ_{d+4} − Δȳ_{d−2}` against
/// `λ 2^{j/2+1} n^{−2/5} σ` (the multiplier times the statistic's standard
/// deviation). The search stops at the first level where the statistic falls
/// below the threshold, and the estimate interpolates the convex projection
/// of that level's bin means at `x0`. Levels are capped so every bin keeps
/// at least 8 observations; if no level triggers, the deepest one is used
/// and the trace is flagged.
pub fn adapt_point(
    y: &[f64],
    x0: f64,
    cfg: &AdaptiveConfig,
) -> Result<PointwiseEstimate, EstimateError> {
    cfg.validate()?;
    let n = y.len();
    if n < 64 {
        return Err(EstimateError::SampleTooSmall { n, need: 64 });
    }
    if !(x0 > 0.0 && x0 < 1.0) {
        return Err(EstimateError::PointOutsideDomain(x0));
    }
    let sigma = match cfg.sigma {
        SigmaSpec::Known(s) => s,
        SigmaSpec::Estimate => pilot_fit(y, cfg.tol)?.sigma_hat,
    };
    let mut levels: Vec<LevelRecord> = Vec::new();
    let mut selected: Option<(usize, ConeSolution, Vec<f64>, usize, f64)> = None;
    let mut capped = false;
    let mut deepest: Option<(usize, ConeSolution, Vec<f64>, usize, f64)> = None;
    for j in 0..=cfg.dyadic_level_cap {
        let kn = dyadic_bin_count(n, j);
        if kn > n / 8 {
            break;
        }
        let threshold = cfg.lambda * 2.0_f64.powf(j as f64 / 2.0 + 1.0)
            * (n as f64).powf(-0.4)
            * sigma;
        if kn < 8 {
            levels.push(LevelRecord {
                level: j,
                kn,
                used_n: 0,
                skipped: true,
                d: None,
                statistic: None,
                threshold,
                triggered: false,
                estimate: None,
            });
            continue;
        }
        let m = n / kn;
        let used_n = m * kn;
        let means = binned_means(&y[..used_n], kn)?;
        let zeta = zeta_with(m, kn, n);
        let d = zeta.partition_point(|&z| z < x0);
        if d < 4 || d + 4 > kn {
            return Err(EstimateError::BoundaryCollision { x0, level: j, kn, d });
        }
        let statistic =
            (means[d + 3] - means[d + 2]) - (means[d - 3] - means[d - 4]);
        let triggered = statistic <= threshold;
        let solution = convex_fit_p0(&means, cfg.tol)?;
        let estimate = interpolate(&zeta, &solution.coeffs, d, x0);
        levels.push(LevelRecord {
            level: j,
            kn,
            used_n,
            skipped: false,
            d: Some(d),
            statistic: Some(statistic),
            threshold,
            triggered,
            estimate: Some(estimate),
        });
        deepest = Some((j, solution.clone(), means.clone(), kn, estimate));
        if triggered {
            selected = Some((j, solution, means, kn, estimate));
            break;
        }
    }
    let (level, solution, _means, kn, value) = match selected {
        Some(s) => s,
        None => {
            capped = true;
            deepest.ok_or(EstimateError::SampleTooSmall { n, need: 64 })?
        }
    };
    let basis = SplineBasis::new(0, kn)?;
    let fit = FittedSpline {
        basis,
        coeffs: solution.coeffs.clone(),
        provenance: Provenance::Pointwise { level },
        sigma_used: Some(sigma),
        certificate: Some(solution.certificate),
    };
    let trace = PointwiseTrace {
        x0,
        sigma,
        lambda: cfg.lambda,
        levels,
        selected_level: level,
        capped,
        seed: cfg.seed,
    };
    Ok(PointwiseEstimate { value, fit, trace })
}
