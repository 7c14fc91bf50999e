//! Command-line front end: fit convex splines from CSV data, run the
//! smoothness-adaptive estimators, estimate noise, and drive the
//! verification and Monte Carlo rate sweeps.
//!
//! Exit codes are part of the contract: 0 success, 2 malformed input or
//! configuration, 3 solver non-certification, 4 boundary collision of the
//! pointwise search, 5 verification or slope-window failure.

mod commands;
mod csvio;

use clap::{Args, Parser, Subcommand};
use cvxspline::estimators::EstimateError;
use cvxspline::lipschitz::LabError;
use cvxspline::simulation::SimError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path} line {line}: {msg}")]
    Csv { path: String, line: usize, msg: String },
    #[error("{0}")]
    Config(String),
    #[error("solver did not certify optimality (worst scaled residual {residual:.3e})")]
    NotCertified { residual: f64 },
    #[error("{0}")]
    Verification(String),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } | CliError::Csv { .. } | CliError::Config(_) => 2,
            CliError::NotCertified { .. } => 3,
            CliError::Verification(_) => 5,
            CliError::Estimate(e) => match e {
                EstimateError::BoundaryCollision { .. } => 4,
                EstimateError::Qp(_) => 3,
                _ => 2,
            },
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Estimate(inner) => CliError::Estimate(inner),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<LabError> for CliError {
    fn from(e: LabError) -> Self {
        match e {
            LabError::EmptyGrid => CliError::Config(e.to_string()),
            other => CliError::Verification(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "cvxspline",
    version,
    about = "Convex B-spline regression: fixed and adaptive fits, noise estimation, verification sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a convex spline to CSV data at a fixed smoothness.
    Fit(FitArgs),
    /// Sup-norm adaptive fit over a smoothness grid.
    AdaptSup(AdaptSupArgs),
    /// Pointwise adaptive estimate at one interior location.
    AdaptPoint(AdaptPointArgs),
    /// Residual-based noise estimate from a convex fit.
    Sigma(SigmaArgs),
    /// Stability sweep of the constrained solution operator.
    VerifyLipschitz(VerifyArgs),
    /// Monte Carlo risk curves and rate slopes.
    McRates(McArgs),
}

#[derive(Args)]
pub struct FitArgs {
    /// Input CSV with header `x,y`; x strictly increasing in (0, 1].
    #[arg(long)]
    pub input: Option<String>,
    /// Directory for outputs [default: .]
    #[arg(long)]
    pub out_dir: Option<String>,
    /// Smoothness index in [1, 4] [default: 2]
    #[arg(long)]
    pub r: Option<f64>,
    /// Smoothness-class scale constant [default: 1]
    #[arg(long)]
    pub l: Option<f64>,
    /// Noise level, or `auto` for a pilot residual estimate [default: auto]
    #[arg(long)]
    pub sigma: Option<String>,
    /// Explicit knot count, bypassing the smoothness-based rule.
    #[arg(long)]
    pub kn: Option<usize>,
    /// Spline degree; requires --kn [default: chosen from r]
    #[arg(long)]
    pub degree: Option<usize>,
    /// Knot-rule target, `sup` or `point` [default: sup]
    #[arg(long)]
    pub mode: Option<String>,
    /// Evaluation grid size for the fitted-curve CSV [default: 512]
    #[arg(long)]
    pub grid: Option<usize>,
    /// Solver certification tolerance [default: 1e-9]
    #[arg(long)]
    pub tol: Option<f64>,
    /// Seed recorded in outputs [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// TOML file whose keys mirror the flag names; flags win.
    #[arg(long)]
    pub config: Option<String>,
}

#[derive(Args)]
pub struct AdaptSupArgs {
    /// Input CSV with header `x,y`; x strictly increasing in (0, 1].
    #[arg(long)]
    pub input: Option<String>,
    /// Directory for outputs [default: .]
    #[arg(long)]
    pub out_dir: Option<String>,
    /// Smoothness-class scale constant [default: 1]
    #[arg(long)]
    pub l: Option<f64>,
    /// Noise level, or `auto` for a pilot residual estimate [default: auto]
    #[arg(long)]
    pub sigma: Option<String>,
    /// Bias constant of the threshold sequence [default: calibrated]
    #[arg(long)]
    pub c1: Option<f64>,
    /// Noise constant of the threshold sequence [default: calibrated]
    #[arg(long)]
    pub c2: Option<f64>,
    /// Cap on the smoothness grid resolution [default: 64]
    #[arg(long)]
    pub sup_grid_cap: Option<usize>,
    /// Evaluation grid size for the fitted-curve CSV [default: 512]
    #[arg(long)]
    pub grid: Option<usize>,
    /// Solver certification tolerance [default: 1e-9]
    #[arg(long)]
    pub tol: Option<f64>,
    /// Seed recorded in outputs [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// TOML file whose keys mirror the flag names; flags win.
    #[arg(long)]
    pub config: Option<String>,
}

#[derive(Args)]
pub struct AdaptPointArgs {
    /// Input CSV with header `x,y`; x strictly increasing in (0, 1].
    #[arg(long)]
    pub input: Option<String>,
    /// Directory for outputs [default: .]
    #[arg(long)]
    pub out_dir: Option<String>,
    /// Estimation point, strictly inside (0, 1).
    #[arg(long)]
    pub x0: Option<f64>,
    /// Smoothness-class scale constant [default: 1]
    #[arg(long)]
    pub l: Option<f64>,
    /// Noise level, or `auto` for a pilot residual estimate [default: auto]
    #[arg(long)]
    pub sigma: Option<String>,
    /// Threshold multiplier, at least 0.675 [default: 0.7]
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Cap on the number of dyadic levels [default: 32]
    #[arg(long)]
    pub level_cap: Option<usize>,
    /// Evaluation grid size for the fitted-curve CSV [default: 512]
    #[arg(long)]
    pub grid: Option<usize>,
    /// Solver certification tolerance [default: 1e-9]
    #[arg(long)]
    pub tol: Option<f64>,
    /// Seed recorded in outputs [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// TOML file whose keys mirror the flag names; flags win.
    #[arg(long)]
    pub config: Option<String>,
}

#[derive(Args)]
pub struct SigmaArgs {
    /// Input CSV with header `x,y`; x strictly increasing in (0, 1].
    #[arg(long)]
    pub input: Option<String>,
    /// Optional directory; when given, `sigma.json` is written there.
    #[arg(long)]
    pub out_dir: Option<String>,
    /// Knot count of the fit the residuals come from [default: ⌈n^(1/3)⌉]
    #[arg(long)]
    pub kn: Option<usize>,
    /// Degree of the fit the residuals come from [default: 1]
    #[arg(long)]
    pub degree: Option<usize>,
    /// Solver certification tolerance [default: 1e-9]
    #[arg(long)]
    pub tol: Option<f64>,
    /// TOML file whose keys mirror the flag names; flags win.
    #[arg(long)]
    pub config: Option<String>,
}

#[derive(Args)]
pub struct VerifyArgs {
    /// Directory for the JSON-lines and CSV reports [default: .]
    #[arg(long)]
    pub out_dir: Option<String>,
    /// Spline degree of the designs swept [default: 1]
    #[arg(long)]
    pub degree: Option<usize>,
    /// Comma-separated knot counts [default: 8,16,32,64,128]
    #[arg(long)]
    pub kn_grid: Option<String>,
    /// Random active sets drawn per knot count [default: 200]
    #[arg(long)]
    pub alphas: Option<usize>,
    /// Largest allowed max/min ratio of ‖G‖∞ across the grid [default: 1.5]
    #[arg(long)]
    pub spread_max: Option<f64>,
    /// Seed for the active-set draws [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// TOML file whose keys mirror the flag names; flags win.
    #[arg(long)]
    pub config: Option<String>,
}

#[derive(Args)]
pub struct McArgs {
    /// Directory for the report outputs [default: .]
    #[arg(long)]
    pub out_dir: Option<String>,
    /// Target function id, f1..f5 [default: f3]
    #[arg(long)]
    pub function: Option<String>,
    /// Estimator: `fixed`, `adapt-sup`, or `adapt-point` [default: fixed]
    #[arg(long)]
    pub estimator: Option<String>,
    /// Smoothness index for the fixed estimator [default: the function's]
    #[arg(long)]
    pub r: Option<f64>,
    /// Scale constant [default: the function's]
    #[arg(long)]
    pub l: Option<f64>,
    /// Noise level of the simulated data [default: 0.1]
    #[arg(long)]
    pub sigma: Option<String>,
    /// Risk metric: `sup`, `point`, or `l2` [default: sup]
    #[arg(long)]
    pub metric: Option<String>,
    /// Location for the pointwise metric and estimator [default: 0.5]
    #[arg(long)]
    pub x0: Option<f64>,
    /// Comma-separated sample sizes [default: 512,1024,2048,4096]
    #[arg(long)]
    pub n_grid: Option<String>,
    /// Monte Carlo replications per sample size, at least 100 [default: 200]
    #[arg(long)]
    pub reps: Option<usize>,
    /// Slope regressor: `auto`, `n`, or `n-per-log` [default: auto]
    #[arg(long)]
    pub abscissa: Option<String>,
    /// `lo,hi` window the fitted slope must fall in; violation exits 5.
    #[arg(long, allow_hyphen_values = true)]
    pub slope_window: Option<String>,
    /// Seed for data generation [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// TOML file whose keys mirror the flag names; flags win.
    #[arg(long)]
    pub config: Option<String>,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(a) => commands::cmd_fit(a),
        Command::AdaptSup(a) => commands::cmd_adapt_sup(a),
        Command::AdaptPoint(a) => commands::cmd_adapt_point(a),
        Command::Sigma(a) => commands::cmd_sigma(a),
        Command::VerifyLipschitz(a) => commands::cmd_verify_lipschitz(a),
        Command::McRates(a) => commands::cmd_mc_rates(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code() as i32);
    }
}
