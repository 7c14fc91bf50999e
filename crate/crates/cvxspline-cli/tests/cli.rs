//! End-to-end tests of the `cvxspline` binary: exit codes, file outputs,
//! and cross-checks of CLI results against direct library calls.

use cvxspline::estimators::{fit_convex, sigma_mle, FittedSpline, Provenance};
use cvxspline::simulation::{gen_data, TestFunction};
use cvxspline::splines::SplineBasis;
use ndarray::Array1;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_cvxspline")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_csv(path: &Path, xs: &[f64], ys: &[f64]) {
    let mut text = String::from("x,y\n");
    for (x, y) in xs.iter().zip(ys) {
        text.push_str(&format!("{x},{y}\n"));
    }
    fs::write(path, text).unwrap();
}

fn parabola_csv(dir: &Path, n: usize, sigma: f64, seed: u64) -> PathBuf {
    let (xs, ys) = gen_data(TestFunction::Parabola, n, sigma, seed);
    let path = dir.join("data.csv");
    write_csv(&path, &xs, &ys);
    path
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn fit_writes_outputs_and_roundtrips() {
    let tmp = tempfile::tempdir().unwrap();
    parabola_csv(tmp.path(), 512, 0.1, 11);
    let out = run_in(
        tmp.path(),
        &["fit", "--input", "data.csv", "--out-dir", "out", "--r", "2", "--l", "2", "--sigma", "0.1"],
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let summary = read_json(&tmp.path().join("out/summary.json"));
    assert_eq!(summary["certified"], true);
    assert_eq!(summary["n"], 512);
    assert_eq!(summary["sigma_source"], "given");
    assert!(summary["min_second_difference"].as_f64().unwrap() >= -1e-9);

    // Round-trip: coefficients + recorded dimensions reproduce the curve.
    let kn = summary["kn"].as_u64().unwrap() as usize;
    let degree = summary["degree"].as_u64().unwrap() as usize;
    let coeffs: Vec<f64> = fs::read_to_string(tmp.path().join("out/coefficients.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    let rebuilt = FittedSpline {
        basis: SplineBasis::new(degree, kn).unwrap(),
        coeffs: Array1::from(coeffs),
        provenance: Provenance::Direct,
        sigma_used: None,
        certificate: None,
    };
    for line in fs::read_to_string(tmp.path().join("out/curve.csv")).unwrap().lines().skip(1) {
        let mut parts = line.split(',');
        let x: f64 = parts.next().unwrap().parse().unwrap();
        let fhat: f64 = parts.next().unwrap().parse().unwrap();
        assert!((rebuilt.value(x).unwrap() - fhat).abs() <= 1e-12, "round-trip drift at x = {x}");
    }
}

#[test]
fn fit_rejects_bad_cells_with_line_numbers() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.csv"), "x,y\n0.25,1.0\n0.5,abc\n0.75,2.0\n").unwrap();
    let out = run_in(tmp.path(), &["fit", "--input", "bad.csv"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 3"), "stderr: {stderr}");
    assert!(stderr.contains("abc"), "stderr: {stderr}");
}

#[test]
fn fit_rejects_disordered_or_out_of_range_x() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("dis.csv"), "x,y\n0.5,1.0\n0.25,2.0\n").unwrap();
    let out = run_in(tmp.path(), &["fit", "--input", "dis.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("strictly increasing"));

    fs::write(tmp.path().join("range.csv"), "x,y\n0.5,1.0\n1.25,2.0\n").unwrap();
    let out = run_in(tmp.path(), &["fit", "--input", "range.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("outside (0, 1]"));

    fs::write(tmp.path().join("head.csv"), "u,v\n0.5,1.0\n").unwrap();
    let out = run_in(tmp.path(), &["fit", "--input", "head.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("expected header"));
}

#[test]
fn fit_auto_sigma_matches_direct_pilot_computation() {
    let tmp = tempfile::tempdir().unwrap();
    parabola_csv(tmp.path(), 512, 0.1, 12);
    let out = run_in(tmp.path(), &["fit", "--input", "data.csv", "--out-dir", "out", "--sigma", "auto"]);
    assert!(out.status.success());
    let summary = read_json(&tmp.path().join("out/summary.json"));
    assert_eq!(summary["sigma_source"], "pilot-mle");

    let (_, y) = gen_data(TestFunction::Parabola, 512, 0.1, 12);
    let pilot_kn = (512f64).powf(1.0 / 3.0).ceil() as usize;
    let pilot = fit_convex(&y, pilot_kn, 1, 1e-9).unwrap();
    let expected = sigma_mle(&y, &pilot);
    assert_eq!(summary["pilot_sigma_sq"].as_f64().unwrap(), expected);
    assert_eq!(summary["sigma"].as_f64().unwrap(), expected.sqrt());
}

#[test]
fn fit_degree_without_kn_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    parabola_csv(tmp.path(), 64, 0.1, 13);
    let out = run_in(tmp.path(), &["fit", "--input", "data.csv", "--degree", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--degree requires --kn"));
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let tmp = tempfile::tempdir().unwrap();
    parabola_csv(tmp.path(), 256, 0.1, 14);
    fs::write(
        tmp.path().join("run.toml"),
        "input = \"data.csv\"\nout-dir = \"from_file\"\nr = 2.0\nl = 2.0\nsigma = 0.1\n",
    )
    .unwrap();
    let out = run_in(
        tmp.path(),
        &["fit", "--config", "run.toml", "--out-dir", "from_flag"],
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("from_flag/summary.json").exists());
    assert!(!tmp.path().join("from_file").exists());
    let summary = read_json(&tmp.path().join("from_flag/summary.json"));
    assert_eq!(summary["sigma"], 0.1);
    assert_eq!(summary["sigma_source"], "given");

    fs::write(tmp.path().join("typo.toml"), "inpot = \"data.csv\"\n").unwrap();
    let out = run_in(tmp.path(), &["fit", "--config", "typo.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn adapt_point_is_exact_on_noiseless_affine_data() {
    let tmp = tempfile::tempdir().unwrap();
    let n = 4096;
    let xs: Vec<f64> = (1..=n).map(|i| i as f64 / n as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 0.2 + 0.5 * x).collect();
    write_csv(&tmp.path().join("affine.csv"), &xs, &ys);
    let out = run_in(
        tmp.path(),
        &["adapt-point", "--input", "affine.csv", "--out-dir", "out", "--x0", "0.5"],
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let estimate = read_json(&tmp.path().join("out/estimate.json"));
    assert!((estimate["value"].as_f64().unwrap() - 0.45).abs() <= 1e-10);
    assert_eq!(estimate["capped"], false);
    let triggered = estimate["trace"]["levels"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|level| level["triggered"] == true)
        .count();
    assert_eq!(triggered, 1, "the search stops at exactly one level");
}

#[test]
fn adapt_point_near_boundary_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    parabola_csv(tmp.path(), 4096, 0.1, 15);
    let out = run_in(
        tmp.path(),
        &["adapt-point", "--input", "data.csv", "--out-dir", "out", "--x0", "0.97"],
    );
    assert_eq!(out.status.code(), Some(4), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("boundary"));
}

#[test]
fn adapt_sup_trace_is_internally_consistent() {
    let tmp = tempfile::tempdir().unwrap();
    parabola_csv(tmp.path(), 1024, 0.1, 16);
    let out = run_in(
        tmp.path(),
        &["adapt-sup", "--input", "data.csv", "--out-dir", "out", "--l", "2"],
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let trace = read_json(&tmp.path().join("out/trace.json"));
    let r_grid: Vec<f64> = trace["r_grid"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let psi: Vec<f64> = trace["psi"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let factor = trace["threshold_factor"].as_f64().unwrap();
    let k_hat = trace["k_hat"].as_u64().unwrap() as usize;
    let r_hat = trace["r_hat"].as_f64().unwrap();
    assert!(r_grid.contains(&r_hat));
    let distances = trace["distances"].as_array().unwrap();
    for j in 0..=k_hat {
        let d = distances[k_hat].as_array().unwrap()[j].as_f64().unwrap();
        assert!(d <= factor * psi[j], "row {k_hat} violates its threshold at column {j}");
    }
    let summary = read_json(&tmp.path().join("out/summary.json"));
    assert_eq!(summary["r_hat"].as_f64().unwrap(), r_hat);
}

#[test]
fn sigma_prints_machine_readable_estimate() {
    let tmp = tempfile::tempdir().unwrap();
    parabola_csv(tmp.path(), 1000, 0.5, 17);
    let out = run_in(tmp.path(), &["sigma", "--input", "data.csv"]);
    assert!(out.status.success());
    let parsed: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(parsed["kn"], 10);
    let sq = parsed["sigma_hat_sq"].as_f64().unwrap();
    assert!(sq > 0.1 && sq < 0.5, "sigma_hat_sq = {sq}");
}

#[test]
fn verify_lipschitz_writes_reports_and_exits_0() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(
        tmp.path(),
        &["verify-lipschitz", "--out-dir", "v", "--kn-grid", "8,16", "--alphas", "25"],
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let jsonl = fs::read_to_string(tmp.path().join("v/lipschitz.jsonl")).unwrap();
    assert_eq!(jsonl.lines().count(), 2);
    for line in jsonl.lines() {
        let rec: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(rec["structure_violations"], 0);
    }
    let csv_text = fs::read_to_string(tmp.path().join("v/lipschitz.csv")).unwrap();
    assert_eq!(csv_text.lines().count(), 3);
    assert!(csv_text.starts_with("kn,m,"));
}

#[test]
fn mc_rates_enforces_replication_floor() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(
        tmp.path(),
        &["mc-rates", "--out-dir", "m", "--reps", "10", "--n-grid", "128,256"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("100"));
}

#[test]
fn mc_rates_reports_slope_and_enforces_window() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(
        tmp.path(),
        &[
            "mc-rates", "--out-dir", "m", "--function", "f3", "--n-grid", "128,192,256,384",
            "--reps", "100", "--slope-window", "-0.01,0.01",
        ],
    );
    assert_eq!(out.status.code(), Some(5), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    // The report is still written, with the slope that failed the window.
    let report = read_json(&tmp.path().join("m/report.json"));
    let slope = report["slope"].as_f64().unwrap();
    assert!(slope < -0.1, "sup-norm risk should shrink with n, slope = {slope}");
    assert_eq!(report["points"].as_array().unwrap().len(), 4);
    let csv_text = fs::read_to_string(tmp.path().join("m/rates.csv")).unwrap();
    assert_eq!(csv_text.lines().count(), 5);

    let out = run_in(
        tmp.path(),
        &[
            "mc-rates", "--out-dir", "m2", "--function", "f3", "--n-grid", "128,192,256,384",
            "--reps", "100", "--slope-window", "-0.9,-0.1",
        ],
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}
