//! Monte Carlo drivers: a catalog of convex test functions, seeded data
//! generation, replicated risk estimation, and log-log rate fits.
//!
//! Reports are bit-for-bit reproducible: every replication draws from its
//! own counter-derived ChaCha substream, and all reductions run in a fixed
//! order regardless of thread scheduling.

use crate::estimators::{
    adapt_point, adapt_sup, fit_fixed_r, AdaptiveConfig, EstimateError, FittedSpline, RiskMode,
};
use crate::linalg::{pairwise_mean, pairwise_sum};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

/// Fewest replications accepted by [`mc_risk`].
pub const MIN_REPS: usize = 100;

/// Grid resolution for sup-norm and L2 risk evaluation.
pub const RISK_GRID: usize = 2000;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("need at least {MIN_REPS} replications, got {0}")]
    TooFewReplications(usize),
    #[error("sample-size grid is empty")]
    EmptyGrid,
    #[error("metric and estimator evaluate different targets")]
    MetricMismatch,
    #[error("every replication failed at n = {n}")]
    AllReplicationsFailed { n: usize },
    #[error("need at least 4 risk points for a slope, got {0}")]
    TooFewPoints(usize),
    #[error("abscissa values are degenerate; cannot fit a slope")]
    DegenerateAbscissa,
    #[error("risk values must be positive to fit a log-log slope")]
    NonpositiveRisk,
    #[error(transparent)]
    Estimate(#[from] EstimateError),
}

/// Convex test functions on `[0, 1]` with their smoothness class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TestFunction {
    /// `|x − 1/2|`: kink at the center, smoothness 1.
    VShape,
    /// `|x − 1/2|^{3/2}`: derivative is Hölder-1/2, smoothness 3/2.
    PowerCusp,
    /// `x²`: smoothness 2.
    Parabola,
    /// `x² + x/10`: infinitely smooth, treated as smoothness 3.
    TiltedParabola,
    /// `e^x`: smoothness 2 with constant `e`.
    Exponential,
}

impl TestFunction {
    pub fn all() -> [TestFunction; 5] {
        [
            TestFunction::VShape,
            TestFunction::PowerCusp,
            TestFunction::Parabola,
            TestFunction::TiltedParabola,
            TestFunction::Exponential,
        ]
    }

    pub fn id(&self) -> &'static str {
        match self {
            TestFunction::VShape => "f1",
            TestFunction::PowerCusp => "f2",
            TestFunction::Parabola => "f3",
            TestFunction::TiltedParabola => "f4",
            TestFunction::Exponential => "f5",
        }
    }

    pub fn from_id(id: &str) -> Option<TestFunction> {
        TestFunction::all().into_iter().find(|f| f.id() == id)
    }

    /// Smoothness index of the class the function belongs to.
    pub fn smoothness(&self) -> f64 {
        match self {
            TestFunction::VShape => 1.0,
            TestFunction::PowerCusp => 1.5,
            TestFunction::Parabola => 2.0,
            TestFunction::TiltedParabola => 3.0,
            TestFunction::Exponential => 2.0,
        }
    }

    /// Hölder constant of the class.
    pub fn hoelder(&self) -> f64 {
        match self {
            TestFunction::VShape => 1.0,
            // sup |f'(a) − f'(b)| / √|a − b| = 3/√2, attained symmetrically
            // around the cusp.
            TestFunction::PowerCusp => 1.5 * std::f64::consts::SQRT_2,
            TestFunction::Parabola => 2.0,
            TestFunction::TiltedParabola => 2.0,
            TestFunction::Exponential => std::f64::consts::E,
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            TestFunction::VShape => (x - 0.5).abs(),
            TestFunction::PowerCusp => (x - 0.5).abs().powf(1.5),
            TestFunction::Parabola => x * x,
            TestFunction::TiltedParabola => x * x + 0.1 * x,
            TestFunction::Exponential => x.exp(),
        }
    }
}

/// Observations `y_i = f(i/n) + σ z_i` with standard normal `z_i` drawn from
/// a ChaCha stream; returns the design points and the observations.
pub fn gen_data(f: TestFunction, n: usize, sigma: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gen_with(f, n, sigma, &mut rng)
}

fn gen_with(f: TestFunction, n: usize, sigma: f64, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let xs: Vec<f64> = (1..=n).map(|i| i as f64 / n as f64).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| f.value(x) + sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();
    (xs, ys)
}

/// Estimator evaluated inside [`mc_risk`].
#[derive(Debug, Clone)]
pub enum EstimatorKind {
    /// Fixed-smoothness fit with the true noise level plugged into the knot
    /// rule.
    FixedR { r: f64, l: f64, mode: RiskMode },
    AdaptiveSup(AdaptiveConfig),
    AdaptivePoint { cfg: AdaptiveConfig, x0: f64 },
}

impl EstimatorKind {
    pub fn label(&self) -> String {
        match self {
            EstimatorKind::FixedR { r, mode, .. } => match mode {
                RiskMode::SupNorm => format!("fixed_r({r})/sup"),
                RiskMode::Pointwise => format!("fixed_r({r})/point"),
            },
            EstimatorKind::AdaptiveSup(_) => "adapt_sup".to_string(),
            EstimatorKind::AdaptivePoint { x0, .. } => format!("adapt_point({x0})"),
        }
    }
}

/// Loss used to score one replication.
#[derive(Debug, Clone, Copy, Serialize)]
pub enum Metric {
    /// Largest absolute error on a fixed grid of [`RISK_GRID`] points.
    SupNorm,
    /// Squared error at a fixed interior point.
    Pointwise { x0: f64 },
    /// Root mean squared error on the same fixed grid.
    L2,
}

/// Risk summary at one sample size.
#[derive(Debug, Clone, Serialize)]
pub struct RiskPoint {
    pub n: usize,
    pub mean_risk: f64,
    pub se_risk: f64,
    pub failures: usize,
}

/// Replicated risk estimates across a sample-size grid.
#[derive(Debug, Clone, Serialize)]
pub struct RiskReport {
    pub estimator: String,
    pub function: String,
    pub metric: Metric,
    pub sigma: f64,
    pub reps: usize,
    pub seed: u64,
    pub points: Vec<RiskPoint>,
    /// Filled by callers of [`rate_slope`].
    pub slope: Option<f64>,
    pub slope_se: Option<f64>,
}

fn metric_value(fit: &FittedSpline, f: TestFunction, metric: Metric) -> f64 {
    match metric {
        Metric::SupNorm => (0..RISK_GRID)
            .map(|g| {
                let x = g as f64 / (RISK_GRID - 1) as f64;
                (fit.value(x).expect("grid point") - f.value(x)).abs()
            })
            .fold(0.0, f64::max),
        Metric::L2 => {
            let sq: Vec<f64> = (0..RISK_GRID)
                .map(|g| {
                    let x = g as f64 / (RISK_GRID - 1) as f64;
                    let d = fit.value(x).expect("grid point") - f.value(x);
                    d * d
                })
                .collect();
            pairwise_mean(&sq).sqrt()
        }
        Metric::Pointwise { x0 } => {
            let d = fit.value(x0).expect("interior point") - f.value(x0);
            d * d
        }
    }
}

fn replicate(
    estimator: &EstimatorKind,
    f: TestFunction,
    n: usize,
    sigma: f64,
    metric: Metric,
    rng: &mut ChaCha8Rng,
) -> Result<f64, EstimateError> {
    let (_, y) = gen_with(f, n, sigma, rng);
    match estimator {
        EstimatorKind::FixedR { r, l, mode } => {
            let fit = fit_fixed_r(&y, *r, *l, sigma, *mode)?;
            Ok(metric_value(&fit, f, metric))
        }
        EstimatorKind::AdaptiveSup(cfg) => {
            let (fit, _) = adapt_sup(&y, cfg)?;
            Ok(metric_value(&fit, f, metric))
        }
        EstimatorKind::AdaptivePoint { cfg, x0 } => {
            let out = adapt_point(&y, *x0, cfg)?;
            let d = out.value - f.value(*x0);
            Ok(d * d)
        }
    }
}

/// Monte Carlo risk curve over a sample-size grid.
///
/// Replication `rep` at grid position `ni` draws from stream
/// `(ni << 32) | rep` of the seeded generator, so reports depend only on
/// `(inputs, seed)` and not on thread scheduling. Estimator failures are
/// counted per sample size rather than aborting the sweep.
pub fn mc_risk(
    estimator: &EstimatorKind,
    f: TestFunction,
    n_grid: &[usize],
    sigma: f64,
    reps: usize,
    metric: Metric,
    seed: u64,
) -> Result<RiskReport, SimError> {
    if reps < MIN_REPS {
        return Err(SimError::TooFewReplications(reps));
    }
    if n_grid.is_empty() {
        return Err(SimError::EmptyGrid);
    }
    if let EstimatorKind::AdaptivePoint { x0, .. } = estimator {
        match metric {
            Metric::Pointwise { x0: m } if (m - x0).abs() < 1e-12 => {}
            _ => return Err(SimError::MetricMismatch),
        }
    }
    let mut points = Vec::with_capacity(n_grid.len());
    for (ni, &n) in n_grid.iter().enumerate() {
        let risks: Vec<Option<f64>> = (0..reps)
            .into_par_iter()
            .map(|rep| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(((ni as u64) << 32) | rep as u64);
                replicate(estimator, f, n, sigma, metric, &mut rng).ok()
            })
            .collect();
        let successes: Vec<f64> = risks.iter().filter_map(|r| *r).collect();
        let failures = reps - successes.len();
        if successes.is_empty() {
            return Err(SimError::AllReplicationsFailed { n });
        }
        let mean = pairwise_mean(&successes);
        let se = if successes.len() > 1 {
            let dev: Vec<f64> = successes.iter().map(|r| (r - mean) * (r - mean)).collect();
            (pairwise_sum(&dev) / (successes.len() - 1) as f64 / successes.len() as f64).sqrt()
        } else {
            0.0
        };
        points.push(RiskPoint { n, mean_risk: mean, se_risk: se, failures });
    }
    Ok(RiskReport {
        estimator: estimator.label(),
        function: f.id().to_string(),
        metric,
        sigma,
        reps,
        seed,
        points,
        slope: None,
        slope_se: None,
    })
}

/// Abscissa of the log-log rate fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Abscissa {
    /// `log n`.
    SampleSize,
    /// `log(n / log n)`, the natural scale for sup-norm rates.
    SampleSizePerLog,
}

/// Least-squares slope of `log(mean risk)` against the chosen abscissa,
/// with its standard error. Requires at least four risk points.
pub fn rate_slope(report: &RiskReport, abscissa: Abscissa) -> Result<(f64, f64), SimError> {
    let m = report.points.len();
    if m < 4 {
        return Err(SimError::TooFewPoints(m));
    }
    let xs: Vec<f64> = report
        .points
        .iter()
        .map(|p| match abscissa {
            Abscissa::SampleSize => (p.n as f64).ln(),
            Abscissa::SampleSizePerLog => (p.n as f64 / (p.n as f64).ln()).ln(),
        })
        .collect();
    if report.points.iter().any(|p| !(p.mean_risk > 0.0)) {
        return Err(SimError::NonpositiveRisk);
    }
    let ys: Vec<f64> = report.points.iter().map(|p| p.mean_risk.ln()).collect();
    let x_mean = pairwise_mean(&xs);
    let y_mean = pairwise_mean(&ys);
    let sxx: f64 = xs.iter().map(|x| (x - x_mean) * (x - x_mean)).sum();
    if sxx < 1e-12 {
        return Err(SimError::DegenerateAbscissa);
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - x_mean) * (y - y_mean)).sum();
    let slope = sxy / sxx;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let resid = (y - y_mean) - slope * (x - x_mean);
            resid * resid
        })
        .sum();
    let se = (rss / (m - 2) as f64 / sxx).sqrt();
    Ok((slope, se))
}
