//! File formats: headerless matrix and vector CSV, and the JSON solve report.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{risk_contributions, Algorithm, CovarianceModel, RiskMeasure, SolveOutcome};

fn parse_cell(text: &str, line: u64, column: usize) -> Result<f64> {
    let t = text.trim();
    t.parse::<f64>().map_err(|_| {
        Error::Input(format!(
            "row {line}, column {}: cannot parse '{t}' as a number",
            column + 1
        ))
    })
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("cannot read {}: {e}", path.display())))
}

/// Parses a square headerless comma-separated matrix.
pub fn parse_matrix_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader(text).records() {
        let record = record.map_err(|e| Error::Input(format!("malformed CSV: {e}")))?;
        let line = record
            .position()
            .map_or(rows.len() as u64 + 1, |p| p.line());
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(j, f)| parse_cell(f, line, j))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 {
        return Err(Error::Input("matrix file is empty".into()));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(Error::Input(format!(
                "row {} has {} columns, expected {n} for a square matrix",
                i + 1,
                row.len()
            )));
        }
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    parse_matrix_csv(&read_to_string(path)?)
}

/// Parses one value per line.
pub fn parse_vector_csv(text: &str) -> Result<Vec<f64>> {
    let mut values = Vec::new();
    for record in reader(text).records() {
        let record = record.map_err(|e| Error::Input(format!("malformed CSV: {e}")))?;
        let line = record
            .position()
            .map_or(values.len() as u64 + 1, |p| p.line());
        let fields: Vec<&str> = record.iter().filter(|f| !f.is_empty()).collect();
        match fields.as_slice() {
            [] => continue,
            [v] => values.push(parse_cell(v, line, 0)?),
            _ => {
                return Err(Error::Input(format!(
                    "row {line}: expected one value per line, found {}",
                    fields.len()
                )))
            }
        }
    }
    if values.is_empty() {
        return Err(Error::Input("vector file is empty".into()));
    }
    Ok(values)
}

pub fn read_vector_csv(path: &Path) -> Result<Vec<f64>> {
    parse_vector_csv(&read_to_string(path)?)
}

/// One row per line, 17 significant digits, no header.
pub fn format_matrix_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::with_capacity(m.nrows() * m.ncols() * 24);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{:.16e}", m[(i, j)]);
        }
        out.push('\n');
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)
        .map_err(|e| Error::Io(format!("cannot write {}: {e}", path.display())))
}

/// Rounds to 12 significant digits.
pub fn round_significant(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{v:.11e}").parse().unwrap_or(v)
}

/// JSON report of a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub algorithm: Algorithm,
    pub converged: bool,
    pub cycles: usize,
    pub elapsed_seconds: f64,
    pub final_gap: f64,
    pub weights: Vec<f64>,
    pub risk_contributions: Vec<f64>,
}

impl SolveReport {
    pub fn new(outcome: &SolveOutcome, cov: &CovarianceModel, measure: &RiskMeasure) -> Self {
        let weights = outcome.weights.as_slice();
        let rc = risk_contributions(weights, cov, measure).unwrap_or_default();
        Self {
            algorithm: outcome.algorithm,
            converged: outcome.converged,
            cycles: outcome.cycles,
            elapsed_seconds: outcome.elapsed_seconds,
            final_gap: outcome.final_gap,
            weights: weights.iter().copied().map(round_significant).collect(),
            risk_contributions: rc.into_iter().map(round_significant).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
