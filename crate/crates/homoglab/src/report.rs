//! CSV and JSON writers. Output depends only on the report contents.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use homoglab_core::fibre::FibreSweep;
use homoglab_core::study::{ConvergenceReport, SlopeFit};
use serde::Serialize;

use crate::CliError;

pub const STUDY_COLUMNS: [&str; 7] = ["equation", "metric", "eps", "lhs", "rhs_norm", "ratio", "slope"];
pub const FIBRE_COLUMNS: [&str; 5] = ["eps", "theta", "k", "ratio", "raw_error"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(CliError::config(format!("unknown format '{other}' (csv or json)"))),
        }
    }
}

impl Format {
    /// From an explicit choice, else the file extension, else JSON.
    pub fn resolve(explicit: Option<&str>, path: Option<&Path>) -> Result<Self, CliError> {
        if let Some(f) = explicit {
            return f.parse();
        }
        match path.and_then(|p| p.extension()).and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => Ok(Format::Csv),
            _ => Ok(Format::Json),
        }
    }
}

pub fn slope_cell(s: &SlopeFit) -> String {
    s.slope().map_or_else(|| "exact".to_string(), |v| v.to_string())
}

fn csv_error(e: csv::Error) -> CliError {
    CliError::Failed(format!("csv: {e}"))
}

pub fn study_csv(report: &ConvergenceReport) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(STUDY_COLUMNS).map_err(csv_error)?;
    for r in &report.rows {
        let slope = report.summary(&r.metric).map(|s| slope_cell(&s.slope)).unwrap_or_default();
        w.write_record([
            r.equation.clone(),
            r.metric.clone(),
            r.eps.to_string(),
            r.lhs.to_string(),
            r.rhs_norm.to_string(),
            r.ratio.to_string(),
            slope,
        ])
        .map_err(csv_error)?;
    }
    w.into_inner().map_err(|e| CliError::Failed(format!("csv: {e}")))
}

pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut out = serde_json::to_vec_pretty(value).map_err(|e| CliError::Failed(format!("json: {e}")))?;
    out.push(b'\n');
    Ok(out)
}

pub fn theta_cell(theta: &[f64]) -> String {
    theta.iter().map(f64::to_string).collect::<Vec<_>>().join(";")
}

pub fn fibre_csv(sweep: &FibreSweep, dim: usize) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(FIBRE_COLUMNS).map_err(csv_error)?;
    for e in &sweep.entries {
        w.write_record([
            e.eps.to_string(),
            theta_cell(&e.theta[..dim]),
            e.k.to_string(),
            e.ratio.to_string(),
            e.raw_error.to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.into_inner().map_err(|e| CliError::Failed(format!("csv: {e}")))
}

/// Writes bytes to a file (naming it on failure) or to stdout.
pub fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|e| CliError::io(p, e)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes).and_then(|_| out.flush()).map_err(|e| CliError::io(Path::new("<stdout>"), e))
        }
    }
}

/// Emits a study report as CSV or JSON.
pub fn emit(report: &ConvergenceReport, path: &Path, format: Format) -> Result<(), CliError> {
    let bytes = match format {
        Format::Csv => study_csv(report)?,
        Format::Json => to_json(report)?,
    };
    write_output(Some(path), &bytes)
}
