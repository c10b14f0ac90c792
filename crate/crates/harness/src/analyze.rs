//! Single-dataset analysis: every configured estimator on one long-format
//! CSV, optionally with a permutation placebo p-value per estimator.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ifelab_core::estimator::{EstimatorSpec, StatisticKind};
use ifelab_core::inference::{placebo_test_with, PlaceboOptions};
use ifelab_core::{load_panel, AttEstimate, ColumnSchema, PanelData};
use serde::{Deserialize, Serialize};

use crate::config::EstimatorEntry;
use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalyzeConfig {
    pub data: PathBuf,
    pub schema: ColumnSchema,
    pub estimators: Vec<EstimatorEntry>,
    pub inference: bool,
    pub permutations: usize,
    pub seed: u64,
    pub controls_only: bool,
}

pub fn default_analyze_estimators() -> Vec<EstimatorEntry> {
    [
        EstimatorSpec::ife(1),
        EstimatorSpec::gsc(1),
        EstimatorSpec::sc(),
        EstimatorSpec::dsc(),
        EstimatorSpec::sdid(),
    ]
    .into_iter()
    .map(EstimatorEntry::new)
    .collect()
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        Self {
            data: PathBuf::new(),
            schema: ColumnSchema::default(),
            estimators: default_analyze_estimators(),
            inference: true,
            permutations: 1000,
            seed: 1,
            controls_only: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeRow {
    pub name: String,
    pub estimate: AttEstimate,
    pub statistic: Option<StatisticKind>,
    pub p_value: Option<f64>,
    pub placebo_failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeReport {
    pub n: usize,
    pub t: usize,
    pub n1: usize,
    pub t0: usize,
    pub rows: Vec<AnalyzeRow>,
}

fn statistic_label(kind: Option<StatisticKind>) -> &'static str {
    match kind {
        Some(StatisticKind::AbsAtt) => "abs_att",
        Some(StatisticKind::MspeRatio) => "mspe_ratio",
        None => "",
    }
}

impl AnalyzeReport {
    pub fn row(&self, name: &str) -> Option<&AnalyzeRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    /// One line per estimator: ATT and the p-value in brackets.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "N={} T={} treated={} pre-periods={} post-periods={}",
            self.n,
            self.t,
            self.n1,
            self.t0,
            self.t - self.t0
        )
        .unwrap();
        let w = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max(9);
        writeln!(out, "{:<w$}  {:>10}  {:>9}  {}", "estimator", "att", "p", "statistic").unwrap();
        for r in &self.rows {
            let p = r.p_value.map(|p| format!("[{p:.3}]")).unwrap_or_default();
            writeln!(
                out,
                "{:<w$}  {:>10.4}  {:>9}  {}",
                r.name,
                r.estimate.att,
                p,
                statistic_label(r.statistic)
            )
            .unwrap();
        }
        out
    }

    pub fn render_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["estimator", "att", "p_value", "statistic", "placebo_failures"])?;
        for r in &self.rows {
            w.write_record([
                r.name.clone(),
                format!("{:.6}", r.estimate.att),
                r.p_value.map(|p| format!("{p:.6}")).unwrap_or_default(),
                statistic_label(r.statistic).to_string(),
                r.placebo_failures.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

pub fn analyze_panel(panel: &PanelData, cfg: &AnalyzeConfig) -> Result<AnalyzeReport> {
    if cfg.estimators.is_empty() {
        return Err(HarnessError::Config("at least one estimator is required".into()));
    }
    if cfg.inference && cfg.permutations == 0 {
        return Err(HarnessError::Config("inference needs permutations >= 1".into()));
    }
    let opts = PlaceboOptions {
        controls_only: cfg.controls_only,
        ..PlaceboOptions::default()
    };
    let mut rows = Vec::new();
    for entry in &cfg.estimators {
        let estimate = entry.spec.fit(panel)?.estimate().clone();
        let (statistic, p_value, placebo_failures) = if cfg.inference {
            let kind = entry.spec.default_statistic();
            let dist = placebo_test_with(panel, &entry.spec, kind, cfg.permutations, cfg.seed, &opts)?;
            (Some(kind), Some(dist.p_value), dist.failures)
        } else {
            (None, None, 0)
        };
        rows.push(AnalyzeRow {
            name: entry.name.clone(),
            estimate,
            statistic,
            p_value,
            placebo_failures,
        });
    }
    Ok(AnalyzeReport {
        n: panel.n(),
        t: panel.t(),
        n1: panel.n1(),
        t0: panel.t0(),
        rows,
    })
}

pub fn analyze_csv(path: &Path, cfg: &AnalyzeConfig) -> Result<AnalyzeReport> {
    let panel = load_panel(path, &cfg.schema)?;
    analyze_panel(&panel, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ifelab_core::dgp::{generate, DgpSpec};

    #[test]
    fn inference_off_leaves_p_empty() {
        let g = generate(&DgpSpec::hom(16, 12).with_seeds(1, 1), 1).unwrap();
        let cfg = AnalyzeConfig {
            inference: false,
            ..AnalyzeConfig::default()
        };
        let report = analyze_panel(&g.panel, &cfg).unwrap();
        assert_eq!(report.rows.len(), 5);
        assert!(report.rows.iter().all(|r| r.p_value.is_none()));
        let csv = report.render_csv().unwrap();
        for line in csv.lines().skip(1) {
            assert_eq!(line.split(',').nth(2), Some(""));
        }
    }

    #[test]
    fn statistics_follow_estimator() {
        let g = generate(&DgpSpec::hom(14, 10).with_seeds(1, 1), 1).unwrap();
        let cfg = AnalyzeConfig {
            permutations: 5,
            ..AnalyzeConfig::default()
        };
        let report = analyze_panel(&g.panel, &cfg).unwrap();
        assert_eq!(report.row("SC").unwrap().statistic, Some(StatisticKind::MspeRatio));
        assert_eq!(report.row("IFE").unwrap().statistic, Some(StatisticKind::AbsAtt));
        for r in &report.rows {
            let p = r.p_value.unwrap();
            assert!((0.0..=1.0).contains(&p));
        }
        assert!(report.render_text().contains('['));
    }
}
