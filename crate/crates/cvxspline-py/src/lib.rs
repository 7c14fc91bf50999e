//! Python bindings: convex spline fits, the two adaptive estimators, and the
//! residual noise estimate, wrapped around a `FittedModel` handle.
//!
//! Traces and certificates cross the boundary as JSON documents so Python
//! callers can `json.loads` them without a bespoke class per record type.

use cvxspline::estimators::{
    self, AdaptiveConfig, EstimateError, FittedSpline, RiskMode, SigmaSpec,
};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py_err(e: EstimateError) -> PyErr {
    match e {
        EstimateError::Qp(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse_mode(mode: &str) -> PyResult<RiskMode> {
    match mode {
        "sup" => Ok(RiskMode::SupNorm),
        "point" => Ok(RiskMode::Pointwise),
        other => Err(PyValueError::new_err(format!(
            "mode must be 'sup' or 'point', got '{other}'"
        ))),
    }
}

fn json_string<T: serde::Serialize>(value: &T) -> PyResult<String> {
    serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// A fitted convex spline: evaluate it, read its coefficients, and inspect
/// the optimality certificate of the constrained solve.
#[pyclass]
struct FittedModel {
    inner: FittedSpline,
}

#[pymethods]
impl FittedModel {
    /// Spline value at a point of `[0, 1]`.
    fn evaluate(&self, x: f64) -> PyResult<f64> {
        self.inner
            .value(x)
            .map_err(|e| to_py_err(EstimateError::from(e)))
    }

    /// Spline values at many points.
    fn evaluate_many(&self, xs: Vec<f64>) -> PyResult<Vec<f64>> {
        xs.into_iter().map(|x| self.evaluate(x)).collect()
    }

    /// Values on an equispaced grid of `points` covering `[0, 1]`.
    fn values_on_grid(&self, points: usize) -> PyResult<Vec<f64>> {
        if points < 2 {
            return Err(PyValueError::new_err("need at least 2 grid points"));
        }
        Ok(self.inner.values_on_grid(points))
    }

    /// Basis coefficients in knot order.
    fn coeffs(&self) -> Vec<f64> {
        self.inner.coeffs.to_vec()
    }

    /// JSON document with the five optimality residuals, or None for
    /// unconstrained fits.
    fn certificate(&self) -> PyResult<Option<String>> {
        match &self.inner.certificate {
            Some(cert) => Ok(Some(json_string(cert)?)),
            None => Ok(None),
        }
    }

    /// JSON document naming the procedure that produced the fit.
    fn provenance(&self) -> PyResult<String> {
        json_string(&self.inner.provenance)
    }

    /// Smallest second difference of the coefficients; nonnegative up to
    /// tolerance exactly when the spline is convex.
    fn min_second_difference(&self) -> f64 {
        self.inner.min_second_difference()
    }

    #[getter]
    fn kn(&self) -> usize {
        self.inner.basis.intervals()
    }

    #[getter]
    fn degree(&self) -> usize {
        self.inner.basis.degree()
    }

    #[getter]
    fn sigma_used(&self) -> Option<f64> {
        self.inner.sigma_used
    }

    fn __repr__(&self) -> String {
        format!(
            "FittedModel(kn={}, degree={}, coeffs={})",
            self.inner.basis.intervals(),
            self.inner.basis.degree(),
            self.inner.coeffs.len()
        )
    }
}

/// Convex least-squares spline fit at an explicit knot count and degree.
#[pyfunction]
#[pyo3(signature = (y, kn, degree=1, tol=1e-9))]
fn fit_convex(y: Vec<f64>, kn: usize, degree: usize, tol: f64) -> PyResult<FittedModel> {
    let inner = estimators::fit_convex(&y, kn, degree, tol).map_err(to_py_err)?;
    Ok(FittedModel { inner })
}

/// Convex fit with the knot count chosen for smoothness `r`, scale `l`, and
/// noise level `sigma`; `mode` is `'sup'` or `'point'`.
#[pyfunction]
#[pyo3(signature = (y, r, l, sigma, mode="sup"))]
fn fit_fixed_r(y: Vec<f64>, r: f64, l: f64, sigma: f64, mode: &str) -> PyResult<FittedModel> {
    let mode = parse_mode(mode)?;
    let inner = estimators::fit_fixed_r(&y, r, l, sigma, mode).map_err(to_py_err)?;
    Ok(FittedModel { inner })
}

/// Least-squares spline fit without the convexity constraint.
#[pyfunction]
#[pyo3(signature = (y, kn, degree=1))]
fn fit_unconstrained(y: Vec<f64>, kn: usize, degree: usize) -> PyResult<FittedModel> {
    let inner = estimators::fit_unconstrained(&y, kn, degree).map_err(to_py_err)?;
    Ok(FittedModel { inner })
}

/// Rate-optimal knot count for known smoothness.
#[pyfunction]
#[pyo3(signature = (r, l, sigma, n, mode="sup"))]
fn optimal_knots(r: f64, l: f64, sigma: f64, n: usize, mode: &str) -> PyResult<usize> {
    let mode = parse_mode(mode)?;
    estimators::optimal_knots(r, l, sigma, n, mode).map_err(to_py_err)
}

fn adaptive_config(
    l: f64,
    sigma: Option<f64>,
    c1: Option<f64>,
    c2: Option<f64>,
    lam: Option<f64>,
    seed: u64,
) -> AdaptiveConfig {
    let mut cfg = AdaptiveConfig::new(l);
    cfg.sigma = match sigma {
        Some(s) => SigmaSpec::Known(s),
        None => SigmaSpec::Estimate,
    };
    cfg.c1 = c1;
    cfg.c2 = c2;
    if let Some(v) = lam {
        cfg.lambda = v;
    }
    cfg.seed = seed;
    cfg
}

/// Sup-norm adaptive convex fit over a smoothness grid.
///
/// Returns `(model, trace_json)`; the trace records the grid, thresholds,
/// pairwise distances, and the selected smoothness.
#[pyfunction]
#[pyo3(signature = (y, l=1.0, sigma=None, c1=None, c2=None, seed=0))]
fn adapt_sup(
    y: Vec<f64>,
    l: f64,
    sigma: Option<f64>,
    c1: Option<f64>,
    c2: Option<f64>,
    seed: u64,
) -> PyResult<(FittedModel, String)> {
    let cfg = adaptive_config(l, sigma, c1, c2, None, seed);
    let (inner, trace) = estimators::adapt_sup(&y, &cfg).map_err(to_py_err)?;
    Ok((FittedModel { inner }, json_string(&trace)?))
}

/// Pointwise adaptive estimate at `x0` inside `(0, 1)`.
///
/// Returns `(value, model, trace_json)`; the trace records every dyadic
/// level examined and the stopping decision.
#[pyfunction]
#[pyo3(signature = (y, x0, l=1.0, sigma=None, lam=None, seed=0))]
fn adapt_point(
    y: Vec<f64>,
    x0: f64,
    l: f64,
    sigma: Option<f64>,
    lam: Option<f64>,
    seed: u64,
) -> PyResult<(f64, FittedModel, String)> {
    let cfg = adaptive_config(l, sigma, None, None, lam, seed);
    let out = estimators::adapt_point(&y, x0, &cfg).map_err(to_py_err)?;
    Ok((out.value, FittedModel { inner: out.fit }, json_string(&out.trace)?))
}

/// Mean squared residual of a fit at the design points `i/n`.
#[pyfunction]
fn sigma_mle(y: Vec<f64>, model: &FittedModel) -> f64 {
    estimators::sigma_mle(&y, &model.inner)
}

#[pymodule]
fn cvxspline_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<FittedModel>()?;
    m.add_function(wrap_pyfunction!(fit_convex, m)?)?;
    m.add_function(wrap_pyfunction!(fit_fixed_r, m)?)?;
    m.add_function(wrap_pyfunction!(fit_unconstrained, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_knots, m)?)?;
    m.add_function(wrap_pyfunction!(adapt_sup, m)?)?;
    m.add_function(wrap_pyfunction!(adapt_point, m)?)?;
    m.add_function(wrap_pyfunction!(sigma_mle, m)?)?;
    Ok(())
}
