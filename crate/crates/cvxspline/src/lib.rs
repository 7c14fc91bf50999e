//! Convex regression with B-splines on equispaced designs.
//!
//! The estimator minimizes a least-squares criterion over spline coefficient
//! vectors whose second differences are nonnegative, which makes the fitted
//! spline convex on `[0, 1]`. On top of the fixed-knot fit the crate provides
//! two data-driven procedures: a grid comparison rule that adapts the knot
//! count to unknown smoothness under sup-norm loss, and a dyadic bin-width
//! search that adapts at a single interior point. A small verification lab
//! for the selection-matrix geometry underlying the solver, a residual-based
//! variance estimator, and Monte Carlo drivers for empirical convergence
//! rates round out the API.

pub mod cone_qp;
pub mod estimators;
pub mod linalg;
pub mod lipschitz;
pub mod simulation;
pub mod splines;

pub use cone_qp::{ConeProblem, ConeSolution, KktCertificate, QpError};
pub use estimators::{
    AdaptiveConfig, EstimateError, FittedSpline, PointwiseEstimate, PointwiseTrace, Provenance,
    RiskMode, SigmaSpec, SupTrace,
};
pub use lipschitz::LipschitzReport;
pub use simulation::{Abscissa, EstimatorKind, Metric, RiskReport, SimError, TestFunction};
pub use splines::{DesignBundle, SplineBasis, SplineError};
