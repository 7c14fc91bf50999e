//! CSV input validation and plot-ready output writers.
//!
//! Inputs carry a mandatory `x,y` header with x strictly increasing in
//! `(0, 1]`; every violation reports the offending line number. Outputs use
//! the shortest round-trippable float formatting so reloading a file
//! reproduces the exact values written.

use crate::CliError;
use cvxspline::estimators::{EstimateError, FittedSpline};
use serde::Serialize;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

/// Validated input series.
pub struct Series {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Series {
    /// Largest gap between the file's abscissae and the equispaced design
    /// `i/n` the estimators assume.
    pub fn design_deviation(&self) -> f64 {
        let n = self.x.len();
        self.x
            .iter()
            .enumerate()
            .map(|(i, &x)| (x - (i + 1) as f64 / n as f64).abs())
            .fold(0.0, f64::max)
    }
}

fn io_err(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io { path: path.display().to_string(), source }
}

fn csv_err(path: &str, line: usize, msg: String) -> CliError {
    CliError::Csv { path: path.to_string(), line, msg }
}

/// Read and validate an `x,y` CSV; line numbers count the header as line 1.
pub fn read_xy(path: &str) -> Result<Series, CliError> {
    let file = File::open(path).map_err(|e| io_err(Path::new(path), e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| csv_err(path, 1, e.to_string()))?
        .clone();
    if headers.len() != 2 || &headers[0] != "x" || &headers[1] != "y" {
        let got = headers.iter().collect::<Vec<_>>().join(",");
        return Err(csv_err(path, 1, format!("expected header `x,y`, got `{got}`")));
    }
    let mut x: Vec<f64> = Vec::new();
    let mut y: Vec<f64> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| csv_err(path, line, e.to_string()))?;
        if record.len() != 2 {
            return Err(csv_err(path, line, format!("expected 2 fields, got {}", record.len())));
        }
        let cell = |idx: usize| -> Result<f64, CliError> {
            let field = &record[idx];
            let v: f64 = field
                .parse()
                .map_err(|_| csv_err(path, line, format!("could not parse `{field}` as a number")))?;
            if !v.is_finite() {
                return Err(csv_err(path, line, format!("non-finite value `{field}`")));
            }
            Ok(v)
        };
        let xv = cell(0)?;
        let yv = cell(1)?;
        if !(xv > 0.0 && xv <= 1.0) {
            return Err(csv_err(path, line, format!("x = {xv} outside (0, 1]")));
        }
        if let Some(&prev) = x.last() {
            if xv <= prev {
                return Err(csv_err(
                    path,
                    line,
                    format!("x must be strictly increasing ({xv} follows {prev})"),
                ));
            }
        }
        x.push(xv);
        y.push(yv);
    }
    if x.is_empty() {
        return Err(csv_err(path, 2, "no data rows".to_string()));
    }
    Ok(Series { x, y })
}

fn writer(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?))
}

/// Fitted values `x,fhat` on an equispaced grid covering `[0, 1]`.
pub fn write_curve(path: &Path, fit: &FittedSpline, grid: usize) -> Result<(), CliError> {
    let mut w = writer(path)?;
    writeln!(w, "x,fhat").map_err(|e| io_err(path, e))?;
    for g in 0..grid {
        let x = g as f64 / (grid - 1) as f64;
        let v = fit.value(x).map_err(EstimateError::from)?;
        writeln!(w, "{x},{v}").map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Coefficient vector as `index,coefficient` rows.
pub fn write_coeffs(path: &Path, fit: &FittedSpline) -> Result<(), CliError> {
    let mut w = writer(path)?;
    writeln!(w, "index,coefficient").map_err(|e| io_err(path, e))?;
    for (i, c) in fit.coeffs.iter().enumerate() {
        writeln!(w, "{i},{c}").map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Pretty-printed JSON document.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = writer(path)?;
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    writeln!(w).map_err(|e| io_err(path, e))?;
    w.flush().map_err(|e| io_err(path, e))
}

/// One compact JSON document per line.
pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    for row in rows {
        let line = serde_json::to_string(row)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        writeln!(w, "{line}").map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}
