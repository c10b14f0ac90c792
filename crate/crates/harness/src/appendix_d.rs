//! Static versus dynamic IFE specifications on the Xu-style design with
//! effects `α_{i,t} = (t - T0) + a_{i,t}`, unit and period effects and two
//! covariates.

use std::fmt::Write as _;

use ifelab_core::dgp::DgpSpec;
use ifelab_core::estimator::EstimatorSpec;
use ifelab_core::ife::{AdditiveEffects, IfeConfig, Specification};
use serde::{Deserialize, Serialize};

use crate::config::default_workers;
use crate::error::{HarnessError, Result};
use crate::report::{CellSummary, SweepReport};
use crate::sweep::{run_replications, summarize};

/// `(N0, N1, T0, T1)`.
pub type DesignRow = [usize; 4];

pub const DEFAULT_ROWS: [DesignRow; 4] = [[40, 20, 15, 10], [200, 20, 15, 10], [500, 20, 500, 10], [500, 500, 500, 100]];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AppendixDConfig {
    pub rows: Vec<DesignRow>,
    pub replications: usize,
    pub structural_seed: u64,
    pub noise_seed: u64,
    pub workers: usize,
    pub k: usize,
}

impl Default for AppendixDConfig {
    fn default() -> Self {
        Self {
            rows: DEFAULT_ROWS.to_vec(),
            replications: 200,
            structural_seed: 1,
            noise_seed: 1,
            workers: default_workers(),
            k: 2,
        }
    }
}

pub fn dyn_ife(k: usize, spec: Specification) -> EstimatorSpec {
    EstimatorSpec::Ife(IfeConfig {
        k,
        spec,
        additive: AdditiveEffects::TwoWay,
        ..IfeConfig::default()
    })
}

/// Index of `ψ_{T0+10}` in the per-period vector (the last period when
/// `T1 < 10`).
pub fn psi_index(t1: usize) -> usize {
    9.min(t1 - 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AppendixDRow {
    pub design: DesignRow,
    pub dynamic_att: CellSummary,
    pub dynamic_psi: CellSummary,
    pub static_att: CellSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AppendixDOutput {
    pub rows: Vec<AppendixDRow>,
    pub report: SweepReport,
}

impl AppendixDOutput {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{}", self.report.title).unwrap();
        writeln!(out, "bias (se of estimate - truth); att against the realized ATT, psi against t - T0").unwrap();
        writeln!(
            out,
            "{:>5} {:>5} {:>5} {:>5}  {:>22}  {:>22}  {:>22}",
            "N0", "N1", "T0", "T1", "dynamic att", "dynamic psi", "static att"
        )
        .unwrap();
        let cell = |c: &CellSummary| format!("{:.4} ({:.3})", c.bias, c.error_sd);
        for r in &self.rows {
            let [n0, n1, t0, t1] = r.design;
            writeln!(
                out,
                "{n0:>5} {n1:>5} {t0:>5} {t1:>5}  {:>22}  {:>22}  {:>22}",
                cell(&r.dynamic_att),
                cell(&r.dynamic_psi),
                cell(&r.static_att)
            )
            .unwrap();
        }
        out
    }
}

pub fn run_appendix_d(cfg: &AppendixDConfig) -> Result<AppendixDOutput> {
    if cfg.replications == 0 || cfg.rows.is_empty() {
        return Err(HarnessError::Config("need replications >= 1 and at least one row".into()));
    }
    let estimators = [dyn_ife(cfg.k, Specification::Dynamic), dyn_ife(cfg.k, Specification::Static)];
    let mut report = SweepReport::new(format!("dynamic vs static IFE, k={}, R={}", cfg.k, cfg.replications));
    let mut rows = Vec::new();
    for &design in &cfg.rows {
        let [n0, n1, t0, t1] = design;
        let dgp = DgpSpec::dyn_design(n0, n1, t0, t1).with_seeds(cfg.structural_seed, cfg.noise_seed);
        let records = run_replications(&dgp, &estimators, cfg.replications, cfg.workers)?;
        let j = psi_index(t1);
        let target = (j + 1) as f64;
        let dynamic_att = summarize(&dgp, &["dynamic_att".into()], &records, |e| Some(e.att), |r| r.true_att);
        let psi_name = format!("dynamic_psi{}", j + 1);
        let dynamic_psi = summarize(
            &dgp,
            &[psi_name],
            &records,
            |e| e.per_period.as_ref().map(|p| p[j]),
            |_| target,
        );
        // the static fit is the second estimator
        let shifted: Vec<_> = records
            .iter()
            .map(|r| crate::sweep::ReplicationRecord {
                rep: r.rep,
                true_att: r.true_att,
                estimates: vec![r.estimates[1].clone()],
            })
            .collect();
        let static_att = summarize(&dgp, &["static_att".into()], &shifted, |e| Some(e.att), |r| r.true_att);
        let row = AppendixDRow {
            design,
            dynamic_att: dynamic_att[0].clone(),
            dynamic_psi: dynamic_psi[0].clone(),
            static_att: static_att[0].clone(),
        };
        report.cells.extend([row.dynamic_att.clone(), row.dynamic_psi.clone(), row.static_att.clone()]);
        rows.push(row);
    }
    Ok(AppendixDOutput { rows, report })
}
