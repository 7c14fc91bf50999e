//! Subcommand implementations: merge flag and file configuration, drive the
//! library, and write plot-ready outputs.

use crate::csvio;
use crate::{
    AdaptPointArgs, AdaptSupArgs, CliError, FitArgs, McArgs, SigmaArgs, VerifyArgs,
};
use cvxspline::cone_qp::DEFAULT_TOL;
use cvxspline::estimators::{
    adapt_point, adapt_sup, degree_for, fit_convex, fit_fixed_r, sigma_mle, AdaptiveConfig,
    FittedSpline, RiskMode, SigmaSpec,
};
use cvxspline::lipschitz::inf_norm_sweep;
use cvxspline::simulation::{mc_risk, rate_slope, Abscissa, EstimatorKind, Metric, TestFunction};
use serde::Deserialize;
use serde_json::json;
use std::fs;
use std::path::PathBuf;

/// Noise specification accepted on the command line: a number or `auto`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaArg {
    Auto,
    Known(f64),
}

pub fn parse_sigma(s: &str) -> Result<SigmaArg, CliError> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(SigmaArg::Auto);
    }
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(SigmaArg::Known(v)),
        _ => Err(CliError::Config(format!(
            "sigma must be a positive number or `auto`, got `{s}`"
        ))),
    }
}

/// TOML value for sigma: a bare number or the string `auto`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum SigmaRaw {
    Num(f64),
    Text(String),
}

impl SigmaRaw {
    fn resolve(&self) -> Result<SigmaArg, CliError> {
        match self {
            SigmaRaw::Num(v) => parse_sigma(&v.to_string()),
            SigmaRaw::Text(s) => parse_sigma(s),
        }
    }
}

/// File-backed configuration; keys mirror the flag names of every
/// subcommand, and each command reads the ones it understands.
#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FileCfg {
    pub input: Option<String>,
    pub out_dir: Option<String>,
    pub r: Option<f64>,
    pub l: Option<f64>,
    pub sigma: Option<SigmaRaw>,
    pub kn: Option<usize>,
    pub degree: Option<usize>,
    pub mode: Option<String>,
    pub grid: Option<usize>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub lambda: Option<f64>,
    pub sup_grid_cap: Option<usize>,
    pub level_cap: Option<usize>,
    pub x0: Option<f64>,
    pub function: Option<String>,
    pub estimator: Option<String>,
    pub metric: Option<String>,
    pub n_grid: Option<Vec<usize>>,
    pub reps: Option<usize>,
    pub abscissa: Option<String>,
    pub slope_window: Option<Vec<f64>>,
    pub kn_grid: Option<Vec<usize>>,
    pub alphas: Option<usize>,
    pub spread_max: Option<f64>,
}

fn load_cfg(path: &Option<String>) -> Result<FileCfg, CliError> {
    match path {
        None => Ok(FileCfg::default()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::Io { path: p.clone(), source: e })?;
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{p}: {e}")))
        }
    }
}

fn require<T>(v: Option<T>, name: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Config(format!("missing required {name}")))
}

fn out_dir(flag: Option<String>, file: Option<String>) -> Result<PathBuf, CliError> {
    let dir = PathBuf::from(flag.or(file).unwrap_or_else(|| ".".to_string()));
    fs::create_dir_all(&dir)
        .map_err(|e| CliError::Io { path: dir.display().to_string(), source: e })?;
    Ok(dir)
}

fn sigma_arg(flag: Option<String>, file: Option<SigmaRaw>) -> Result<SigmaArg, CliError> {
    match (flag, file) {
        (Some(s), _) => parse_sigma(&s),
        (None, Some(raw)) => raw.resolve(),
        (None, None) => Ok(SigmaArg::Auto),
    }
}

fn check_grid(grid: usize) -> Result<(), CliError> {
    if grid < 2 {
        return Err(CliError::Config(format!("grid must be at least 2, got {grid}")));
    }
    Ok(())
}

/// Success requires a passing certificate; never exit 0 without one.
fn certified(fit: &FittedSpline) -> Result<(), CliError> {
    if let Some(cert) = &fit.certificate {
        if !cert.passes() {
            return Err(CliError::NotCertified { residual: cert.max_residual() });
        }
    }
    Ok(())
}

/// Knot count of the pilot fit behind `--sigma auto`.
fn pilot_kn(n: usize) -> usize {
    ((n as f64).powf(1.0 / 3.0).ceil() as usize).clamp(2, (n / 2).max(2))
}

/// Resolve sigma: pass a given value through, or take the root of the
/// residual estimate from a rough pilot fit.
fn resolve_sigma(
    y: &[f64],
    arg: SigmaArg,
    tol: f64,
) -> Result<(f64, Option<f64>, &'static str), CliError> {
    match arg {
        SigmaArg::Known(v) => Ok((v, None, "given")),
        SigmaArg::Auto => {
            let pilot = fit_convex(y, pilot_kn(y.len()), 1, tol)?;
            let mle = sigma_mle(y, &pilot);
            let scale = y.iter().fold(1.0_f64, |a, &v| a.max(v.abs()));
            Ok((mle.sqrt().max(1e-10 * scale), Some(mle), "pilot-mle"))
        }
    }
}

fn parse_usize_list(s: &str) -> Result<Vec<usize>, CliError> {
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Config(format!("could not parse `{tok}` as an integer")))
        })
        .collect()
}

fn parse_window(s: &str) -> Result<(f64, f64), CliError> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || CliError::Config(format!("slope window must be `lo,hi` with lo <= hi, got `{s}`"));
    if parts.len() != 2 {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(bad());
    }
    Ok((lo, hi))
}

fn window_from_file(v: &[f64]) -> Result<(f64, f64), CliError> {
    if v.len() != 2 || !(v[0].is_finite() && v[1].is_finite() && v[0] <= v[1]) {
        return Err(CliError::Config(format!(
            "slope-window must be [lo, hi] with lo <= hi, got {v:?}"
        )));
    }
    Ok((v[0], v[1]))
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

pub fn cmd_fit(a: FitArgs) -> Result<(), CliError> {
    let f = load_cfg(&a.config)?;
    let input = require(a.input.or(f.input), "--input")?;
    let dir = out_dir(a.out_dir, f.out_dir)?;
    let r = a.r.or(f.r).unwrap_or(2.0);
    let l = a.l.or(f.l).unwrap_or(1.0);
    let sigma_spec = sigma_arg(a.sigma, f.sigma)?;
    let kn_flag = a.kn.or(f.kn);
    let degree_flag = a.degree.or(f.degree);
    let mode = match a.mode.or(f.mode).unwrap_or_else(|| "sup".to_string()).as_str() {
        "sup" => RiskMode::SupNorm,
        "point" => RiskMode::Pointwise,
        other => return Err(CliError::Config(format!("mode must be `sup` or `point`, got `{other}`"))),
    };
    let grid = a.grid.or(f.grid).unwrap_or(512);
    check_grid(grid)?;
    let tol = a.tol.or(f.tol).unwrap_or(DEFAULT_TOL);
    let seed = a.seed.or(f.seed).unwrap_or(0);
    if degree_flag.is_some() && kn_flag.is_none() {
        return Err(CliError::Config("--degree requires --kn".to_string()));
    }

    let series = csvio::read_xy(&input)?;
    let y = &series.y;
    let (sigma, pilot_sq, sigma_source) = resolve_sigma(y, sigma_spec, tol)?;
    let fit = match kn_flag {
        Some(kn) => {
            let degree = degree_flag.unwrap_or_else(|| degree_for(r));
            let mut fit = fit_convex(y, kn, degree, tol)?;
            fit.sigma_used = Some(sigma);
            fit
        }
        None => fit_fixed_r(y, r, l, sigma, mode)?,
    };
    certified(&fit)?;

    csvio::write_curve(&dir.join("curve.csv"), &fit, grid)?;
    csvio::write_coeffs(&dir.join("coefficients.csv"), &fit)?;
    let summary = json!({
        "command": "fit",
        "input": input,
        "n": y.len(),
        "kn": fit.basis.intervals(),
        "degree": fit.basis.degree(),
        "provenance": fit.provenance,
        "sigma": sigma,
        "sigma_source": sigma_source,
        "pilot_sigma_sq": pilot_sq,
        "sigma_hat_sq": sigma_mle(y, &fit),
        "min_second_difference": fit.min_second_difference(),
        "design_deviation": series.design_deviation(),
        "certified": true,
        "certificate": fit.certificate,
        "grid": grid,
        "seed": seed,
    });
    csvio::write_json(&dir.join("summary.json"), &summary)?;
    println!(
        "fit: n={} kn={} degree={} sigma={:.6e} -> {}",
        y.len(),
        fit.basis.intervals(),
        fit.basis.degree(),
        sigma,
        dir.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// adapt-sup / adapt-point
// ---------------------------------------------------------------------------

fn adaptive_config(
    l: f64,
    sigma: SigmaArg,
    c1: Option<f64>,
    c2: Option<f64>,
    tol: Option<f64>,
    seed: u64,
) -> AdaptiveConfig {
    let mut cfg = AdaptiveConfig::new(l);
    cfg.sigma = match sigma {
        SigmaArg::Auto => SigmaSpec::Estimate,
        SigmaArg::Known(v) => SigmaSpec::Known(v),
    };
    cfg.c1 = c1;
    cfg.c2 = c2;
    if let Some(t) = tol {
        cfg.tol = t;
    }
    cfg.seed = seed;
    cfg
}

pub fn cmd_adapt_sup(a: AdaptSupArgs) -> Result<(), CliError> {
    let f = load_cfg(&a.config)?;
    let input = require(a.input.or(f.input), "--input")?;
    let dir = out_dir(a.out_dir, f.out_dir)?;
    let l = a.l.or(f.l).unwrap_or(1.0);
    let sigma_spec = sigma_arg(a.sigma, f.sigma)?;
    let grid = a.grid.or(f.grid).unwrap_or(512);
    check_grid(grid)?;
    let seed = a.seed.or(f.seed).unwrap_or(0);
    let mut cfg = adaptive_config(l, sigma_spec, a.c1.or(f.c1), a.c2.or(f.c2), a.tol.or(f.tol), seed);
    if let Some(cap) = a.sup_grid_cap.or(f.sup_grid_cap) {
        cfg.sup_grid_cap = cap;
    }

    let series = csvio::read_xy(&input)?;
    let (fit, trace) = adapt_sup(&series.y, &cfg)?;
    certified(&fit)?;

    csvio::write_curve(&dir.join("curve.csv"), &fit, grid)?;
    csvio::write_coeffs(&dir.join("coefficients.csv"), &fit)?;
    csvio::write_json(&dir.join("trace.json"), &trace)?;
    let summary = json!({
        "command": "adapt-sup",
        "input": input,
        "n": series.y.len(),
        "kn": fit.basis.intervals(),
        "degree": fit.basis.degree(),
        "provenance": fit.provenance,
        "r_hat": trace.r_hat,
        "k_hat": trace.k_hat,
        "sigma": trace.sigma,
        "c1": trace.c1,
        "c2": trace.c2,
        "sigma_hat_sq": sigma_mle(&series.y, &fit),
        "min_second_difference": fit.min_second_difference(),
        "design_deviation": series.design_deviation(),
        "certified": true,
        "certificate": fit.certificate,
        "grid": grid,
        "seed": seed,
    });
    csvio::write_json(&dir.join("summary.json"), &summary)?;
    println!(
        "adapt-sup: r_hat={:.4} kn={} -> {}",
        trace.r_hat,
        fit.basis.intervals(),
        dir.display()
    );
    Ok(())
}

pub fn cmd_adapt_point(a: AdaptPointArgs) -> Result<(), CliError> {
    let f = load_cfg(&a.config)?;
    let input = require(a.input.or(f.input), "--input")?;
    let dir = out_dir(a.out_dir, f.out_dir)?;
    let x0 = require(a.x0.or(f.x0), "--x0")?;
    let l = a.l.or(f.l).unwrap_or(1.0);
    let sigma_spec = sigma_arg(a.sigma, f.sigma)?;
    let grid = a.grid.or(f.grid).unwrap_or(512);
    check_grid(grid)?;
    let seed = a.seed.or(f.seed).unwrap_or(0);
    let mut cfg = adaptive_config(l, sigma_spec, None, None, a.tol.or(f.tol), seed);
    if let Some(lambda) = a.lambda.or(f.lambda) {
        cfg.lambda = lambda;
    }
    if let Some(cap) = a.level_cap.or(f.level_cap) {
        cfg.dyadic_level_cap = cap;
    }

    let series = csvio::read_xy(&input)?;
    let out = adapt_point(&series.y, x0, &cfg)?;
    certified(&out.fit)?;

    csvio::write_curve(&dir.join("curve.csv"), &out.fit, grid)?;
    csvio::write_coeffs(&dir.join("coefficients.csv"), &out.fit)?;
    let estimate = json!({
        "command": "adapt-point",
        "input": input,
        "x0": x0,
        "value": out.value,
        "selected_level": out.trace.selected_level,
        "capped": out.trace.capped,
        "trace": out.trace,
    });
    csvio::write_json(&dir.join("estimate.json"), &estimate)?;
    let summary = json!({
        "command": "adapt-point",
        "input": input,
        "n": series.y.len(),
        "kn": out.fit.basis.intervals(),
        "degree": out.fit.basis.degree(),
        "provenance": out.fit.provenance,
        "x0": x0,
        "value": out.value,
        "sigma": out.trace.sigma,
        "lambda": out.trace.lambda,
        "design_deviation": series.design_deviation(),
        "certified": true,
        "certificate": out.fit.certificate,
        "grid": grid,
        "seed": seed,
    });
    csvio::write_json(&dir.join("summary.json"), &summary)?;
    println!(
        "adapt-point: f({x0}) = {:.6e} at level {}{} -> {}",
        out.value,
        out.trace.selected_level,
        if out.trace.capped { " (capped)" } else { "" },
        dir.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// sigma
// ---------------------------------------------------------------------------

pub fn cmd_sigma(a: SigmaArgs) -> Result<(), CliError> {
    let f = load_cfg(&a.config)?;
    let input = require(a.input.or(f.input), "--input")?;
    let tol = a.tol.or(f.tol).unwrap_or(DEFAULT_TOL);
    let series = csvio::read_xy(&input)?;
    let n = series.y.len();
    let kn = a.kn.or(f.kn).unwrap_or_else(|| pilot_kn(n));
    let degree = a.degree.or(f.degree).unwrap_or(1);
    let fit = fit_convex(&series.y, kn, degree, tol)?;
    certified(&fit)?;
    let sq = sigma_mle(&series.y, &fit);
    let summary = json!({
        "command": "sigma",
        "input": input,
        "n": n,
        "kn": kn,
        "degree": degree,
        "sigma_hat_sq": sq,
        "sigma_hat": sq.sqrt(),
    });
    println!(
        "{}",
        serde_json::to_string(&summary).map_err(|e| CliError::Config(e.to_string()))?
    );
    if let Some(dirname) = a.out_dir.or(f.out_dir) {
        let dir = out_dir(Some(dirname), None)?;
        csvio::write_json(&dir.join("sigma.json"), &summary)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// verify-lipschitz
// ---------------------------------------------------------------------------

pub fn cmd_verify_lipschitz(a: VerifyArgs) -> Result<(), CliError> {
    let f = load_cfg(&a.config)?;
    let dir = out_dir(a.out_dir, f.out_dir)?;
    let degree = a.degree.or(f.degree).unwrap_or(1);
    let kn_grid = match a.kn_grid {
        Some(s) => parse_usize_list(&s)?,
        None => f.kn_grid.unwrap_or_else(|| vec![8, 16, 32, 64, 128]),
    };
    let alphas = a.alphas.or(f.alphas).unwrap_or(200);
    let spread_max = a.spread_max.or(f.spread_max).unwrap_or(1.5);
    let seed = a.seed.or(f.seed).unwrap_or(0);

    let report = inf_norm_sweep(degree, &kn_grid, alphas, seed)?;
    csvio::write_jsonl(&dir.join("lipschitz.jsonl"), &report.records)?;
    let mut csv_text = String::from(
        "kn,m,alphas_tested,sampling,max_inf_norm_g,eig_min,eig_max,row_sum_deviation,structure_violations\n",
    );
    for rec in &report.records {
        csv_text.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            rec.kn,
            rec.m,
            rec.alphas_tested,
            rec.sampling,
            rec.max_inf_norm_g,
            rec.eig_min,
            rec.eig_max,
            rec.row_sum_deviation,
            rec.structure_violations
        ));
    }
    fs::write(dir.join("lipschitz.csv"), csv_text)
        .map_err(|e| CliError::Io { path: dir.join("lipschitz.csv").display().to_string(), source: e })?;
    csvio::write_json(&dir.join("lipschitz.json"), &report)?;

    let violations = report.total_violations();
    if violations > 0 {
        return Err(CliError::Verification(format!(
            "{violations} structural violations; reports written to {}",
            dir.display()
        )));
    }
    if report.spread_ratio > spread_max {
        return Err(CliError::Verification(format!(
            "operator norm spread {:.4} exceeds the allowed {spread_max}; reports written to {}",
            report.spread_ratio,
            dir.display()
        )));
    }
    println!(
        "verify-lipschitz: {} knot counts, 0 violations, spread {:.4} <= {spread_max} -> {}",
        report.records.len(),
        report.spread_ratio,
        dir.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// mc-rates
// ---------------------------------------------------------------------------

pub fn cmd_mc_rates(a: McArgs) -> Result<(), CliError> {
    let f = load_cfg(&a.config)?;
    let dir = out_dir(a.out_dir, f.out_dir)?;
    let fid = a.function.or(f.function).unwrap_or_else(|| "f3".to_string());
    let function = TestFunction::from_id(&fid)
        .ok_or_else(|| CliError::Config(format!("unknown function id `{fid}`; expected f1..f5")))?;
    let estimator_name = a.estimator.or(f.estimator).unwrap_or_else(|| "fixed".to_string());
    let metric_name = a.metric.or(f.metric).unwrap_or_else(|| "sup".to_string());
    let x0 = a.x0.or(f.x0).unwrap_or(0.5);
    let metric = match metric_name.as_str() {
        "sup" => Metric::SupNorm,
        "point" => Metric::Pointwise { x0 },
        "l2" => Metric::L2,
        other => {
            return Err(CliError::Config(format!(
                "metric must be `sup`, `point`, or `l2`, got `{other}`"
            )))
        }
    };
    let r = a.r.or(f.r).unwrap_or_else(|| function.smoothness());
    let l = a.l.or(f.l).unwrap_or_else(|| function.hoelder());
    let sigma = match sigma_arg(a.sigma, f.sigma)? {
        SigmaArg::Known(v) => v,
        SigmaArg::Auto => 0.1,
    };
    let n_grid = match a.n_grid {
        Some(s) => parse_usize_list(&s)?,
        None => f.n_grid.unwrap_or_else(|| vec![512, 1024, 2048, 4096]),
    };
    let reps = a.reps.or(f.reps).unwrap_or(200);
    let seed = a.seed.or(f.seed).unwrap_or(0);
    let window = match a.slope_window {
        Some(s) => Some(parse_window(&s)?),
        None => f.slope_window.as_deref().map(window_from_file).transpose()?,
    };

    let estimator = match estimator_name.as_str() {
        "fixed" => {
            let mode = match metric {
                Metric::Pointwise { .. } => RiskMode::Pointwise,
                _ => RiskMode::SupNorm,
            };
            EstimatorKind::FixedR { r, l, mode }
        }
        "adapt-sup" => EstimatorKind::AdaptiveSup(adaptive_config(l, SigmaArg::Auto, None, None, None, seed)),
        "adapt-point" => EstimatorKind::AdaptivePoint {
            cfg: adaptive_config(l, SigmaArg::Auto, None, None, None, seed),
            x0,
        },
        other => {
            return Err(CliError::Config(format!(
                "estimator must be `fixed`, `adapt-sup`, or `adapt-point`, got `{other}`"
            )))
        }
    };

    let mut report = mc_risk(&estimator, function, &n_grid, sigma, reps, metric, seed)?;
    let abscissa = match a.abscissa.or(f.abscissa).unwrap_or_else(|| "auto".to_string()).as_str() {
        "auto" => match metric {
            Metric::SupNorm => Abscissa::SampleSizePerLog,
            _ => Abscissa::SampleSize,
        },
        "n" => Abscissa::SampleSize,
        "n-per-log" => Abscissa::SampleSizePerLog,
        other => {
            return Err(CliError::Config(format!(
                "abscissa must be `auto`, `n`, or `n-per-log`, got `{other}`"
            )))
        }
    };
    if report.points.len() >= 4 {
        if let Ok((slope, se)) = rate_slope(&report, abscissa) {
            report.slope = Some(slope);
            report.slope_se = Some(se);
        }
    }

    csvio::write_jsonl(&dir.join("rates.jsonl"), &report.points)?;
    let mut csv_text = String::from("n,mean_risk,se_risk,failures\n");
    for p in &report.points {
        csv_text.push_str(&format!("{},{},{},{}\n", p.n, p.mean_risk, p.se_risk, p.failures));
    }
    fs::write(dir.join("rates.csv"), csv_text)
        .map_err(|e| CliError::Io { path: dir.join("rates.csv").display().to_string(), source: e })?;
    csvio::write_json(&dir.join("report.json"), &report)?;

    if let Some((lo, hi)) = window {
        match report.slope {
            Some(s) if (lo..=hi).contains(&s) => {}
            Some(s) => {
                return Err(CliError::Verification(format!(
                    "slope {s:.4} outside the window [{lo}, {hi}]; reports written to {}",
                    dir.display()
                )))
            }
            None => {
                return Err(CliError::Verification(
                    "slope window requested but no slope could be fitted (need 4+ sample sizes with positive risks)"
                        .to_string(),
                ))
            }
        }
    }
    println!(
        "mc-rates: {} {} over {:?}, slope {} -> {}",
        report.estimator,
        report.function,
        n_grid,
        report
            .slope
            .map(|s| format!("{s:.4}"))
            .unwrap_or_else(|| "n/a".to_string()),
        dir.display()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_strings_parse() {
        assert_eq!(parse_sigma("auto").unwrap(), SigmaArg::Auto);
        assert_eq!(parse_sigma("0.25").unwrap(), SigmaArg::Known(0.25));
        assert!(parse_sigma("-1").is_err());
        assert!(parse_sigma("nan").is_err());
        assert!(parse_sigma("").is_err());
    }

    #[test]
    fn lists_and_windows_parse() {
        assert_eq!(parse_usize_list("8, 16,32").unwrap(), vec![8, 16, 32]);
        assert!(parse_usize_list("8,x").is_err());
        assert_eq!(parse_window("-0.48,-0.32").unwrap(), (-0.48, -0.32));
        assert!(parse_window("1,0").is_err());
        assert!(parse_window("1").is_err());
        assert!(window_from_file(&[0.0]).is_err());
        assert_eq!(window_from_file(&[-1.0, 1.0]).unwrap(), (-1.0, 1.0));
    }

    #[test]
    fn pilot_knot_rule_tracks_cube_root() {
        assert_eq!(pilot_kn(8), 2);
        assert_eq!(pilot_kn(1000), 10);
        assert_eq!(pilot_kn(5000), 18);
    }

    #[test]
    fn file_config_parses_kebab_case_keys() {
        let cfg: FileCfg = toml::from_str(
            "input = \"d.csv\"\nout-dir = \"o\"\nsigma = \"auto\"\nn-grid = [128, 256]\nslope-window = [-1.0, 0.0]\n",
        )
        .unwrap();
        assert_eq!(cfg.input.as_deref(), Some("d.csv"));
        assert_eq!(cfg.n_grid, Some(vec![128, 256]));
        assert!(matches!(cfg.sigma, Some(SigmaRaw::Text(_))));
        let bad: Result<FileCfg, _> = toml::from_str("unknown-key = 1");
        assert!(bad.is_err());
    }

    #[test]
    fn numeric_sigma_in_file_resolves() {
        let cfg: FileCfg = toml::from_str("sigma = 0.5").unwrap();
        assert_eq!(cfg.sigma.unwrap().resolve().unwrap(), SigmaArg::Known(0.5));
    }
}
