//! Aggregated sweep results and their text / CSV renderings.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One (design, size, estimator) cell. Moments are over replications that
/// produced a converged estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub design: String,
    pub t: usize,
    pub n: usize,
    pub estimator: String,
    pub mean: f64,
    pub sd: f64,
    /// Mean of the per-replication truth over the same replications.
    pub true_att: f64,
    pub bias: f64,
    /// Sample SD of `estimate - truth`; differs from `sd` when the truth
    /// varies across replications.
    pub error_sd: f64,
    pub replications: usize,
    pub nonconverged: usize,
    pub failed: usize,
}

/// Per-replication outcome for one estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    Estimate { value: f64, converged: bool },
    Failed,
}

impl CellSummary {
    pub fn from_outcomes(design: &str, t: usize, n: usize, estimator: &str, outcomes: &[(Outcome, f64)]) -> Self {
        let mut values = Vec::new();
        let mut truths = Vec::new();
        let mut errors = Vec::new();
        let mut nonconverged = 0;
        let mut failed = 0;
        for &(outcome, truth) in outcomes {
            match outcome {
                Outcome::Estimate { value, converged: true } => {
                    values.push(value);
                    truths.push(truth);
                    errors.push(value - truth);
                }
                Outcome::Estimate { converged: false, .. } => nonconverged += 1,
                Outcome::Failed => failed += 1,
            }
        }
        let (mean, sd) = mean_sd(&values);
        let true_att = mean_sd(&truths).0;
        Self {
            design: design.to_string(),
            t,
            n,
            estimator: estimator.to_string(),
            mean,
            sd,
            true_att,
            bias: mean - true_att,
            error_sd: mean_sd(&errors).1,
            replications: values.len(),
            nonconverged,
            failed,
        }
    }
}

/// Mean and sample standard deviation; SD is NaN below two values.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub title: String,
    pub cells: Vec<CellSummary>,
}

const COLUMNS: [&str; 12] = [
    "design",
    "T",
    "N",
    "estimator",
    "mean",
    "sd",
    "true_att",
    "bias",
    "error_sd",
    "reps",
    "nonconverged",
    "failed",
];

fn num(v: f64) -> String {
    format!("{v:.6}")
}

impl SweepReport {
    pub fn new(title: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            cells: Vec::new(),
        }
    }

    pub fn cell(&self, design: &str, t: usize, n: usize, estimator: &str) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.design == design && c.t == t && c.n == n && c.estimator == estimator)
    }

    fn rows(&self) -> Vec<[String; 12]> {
        self.cells
            .iter()
            .map(|c| {
                [
                    c.design.clone(),
                    c.t.to_string(),
                    c.n.to_string(),
                    c.estimator.clone(),
                    num(c.mean),
                    num(c.sd),
                    num(c.true_att),
                    num(c.bias),
                    num(c.error_sd),
                    c.replications.to_string(),
                    c.nonconverged.to_string(),
                    c.failed.to_string(),
                ]
            })
            .collect()
    }

    /// Aligned long-format table, one line per cell.
    pub fn render_text(&self) -> String {
        let rows = self.rows();
        let mut widths: Vec<usize> = COLUMNS.iter().map(|c| c.len()).collect();
        for row in &rows {
            for (w, v) in widths.iter_mut().zip(row.iter()) {
                *w = (*w).max(v.len());
            }
        }
        let mut out = String::new();
        writeln!(out, "{}", self.title).unwrap();
        let line = |cells: Vec<&str>| -> String {
            cells
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(j, (v, w))| if j < 4 { format!("{v:<w$}") } else { format!("{v:>w$}") })
                .collect::<Vec<_>>()
                .join("  ")
        };
        writeln!(out, "{}", line(COLUMNS.to_vec())).unwrap();
        for row in &rows {
            writeln!(out, "{}", line(row.iter().map(String::as_str).collect())).unwrap();
        }
        out
    }

    /// Table-style layout: one row per (design, T, N), one column per
    /// estimator with `mean (sd)`, estimators in first-seen order.
    pub fn render_wide(&self) -> String {
        let mut estimators: Vec<&str> = Vec::new();
        let mut keys: Vec<(&str, usize, usize)> = Vec::new();
        for c in &self.cells {
            if !estimators.contains(&c.estimator.as_str()) {
                estimators.push(&c.estimator);
            }
            let key = (c.design.as_str(), c.t, c.n);
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
        let mut table: Vec<Vec<String>> = Vec::new();
        let mut header = vec!["design".to_string(), "T".to_string(), "N".to_string()];
        header.extend(estimators.iter().map(|e| e.to_string()));
        table.push(header);
        for &(design, t, n) in &keys {
            let mut row = vec![design.to_string(), t.to_string(), n.to_string()];
            for e in &estimators {
                row.push(match self.cell(design, t, n, e) {
                    Some(c) => format!("{:.3} ({:.3})", c.mean, c.sd),
                    None => "-".to_string(),
                });
            }
            table.push(row);
        }
        let cols = table[0].len();
        let widths: Vec<usize> = (0..cols).map(|j| table.iter().map(|r| r[j].len()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        writeln!(out, "{}", self.title).unwrap();
        for row in &table {
            let line: Vec<String> = row.iter().zip(&widths).map(|(v, w)| format!("{v:>w$}")).collect();
            writeln!(out, "{}", line.join("  ")).unwrap();
        }
        out
    }

    pub fn render_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(COLUMNS)?;
        for row in self.rows() {
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Writes `report.txt` (the given rendering) and `report.csv` into `dir`.
    pub fn write(&self, dir: &Path, text: &str) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.txt"), text)?;
        fs::write(dir.join("report.csv"), self.render_csv()?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_moments_and_counts() {
        let outcomes = vec![
            (Outcome::Estimate { value: 1.0, converged: true }, 2.0),
            (Outcome::Estimate { value: 3.0, converged: true }, 2.0),
            (Outcome::Estimate { value: 100.0, converged: false }, 2.0),
            (Outcome::Failed, 2.0),
        ];
        let c = CellSummary::from_outcomes("HET", 50, 50, "IFE", &outcomes);
        assert_eq!(c.mean, 2.0);
        assert!((c.sd - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!((c.replications, c.nonconverged, c.failed), (2, 1, 1));
        assert_eq!(c.bias, 0.0);
        assert!((c.error_sd - c.sd).abs() < 1e-15);
    }

    #[test]
    fn text_and_csv_carry_identical_numbers() {
        let mut r = SweepReport::new("demo");
        r.cells.push(CellSummary::from_outcomes(
            "HOM",
            50,
            50,
            "SC",
            &[
                (Outcome::Estimate { value: 2.1234567, converged: true }, 2.0),
                (Outcome::Estimate { value: 1.9, converged: true }, 2.0),
            ],
        ));
        let text = r.render_text();
        let csv = r.render_csv().unwrap();
        let data_line = csv.lines().nth(1).unwrap();
        for field in data_line.split(',') {
            assert!(text.contains(field), "{field} missing from text");
        }
        assert!(r.render_wide().contains("2.012 (0.158)"));
    }
}
