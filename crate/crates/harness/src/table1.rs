//! The homogeneous / heterogeneous ATT grid: five estimators over a (T, N)
//! grid for both effect designs.

use ifelab_core::dgp::{Design, DgpSpec};
use ifelab_core::estimator::EstimatorSpec;
use serde::{Deserialize, Serialize};

use crate::config::{default_workers, EstimatorEntry, ExperimentConfig};
use crate::error::Result;
use crate::report::SweepReport;
use crate::sweep::run_sweep;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    /// T, N in {50, 100}, R = 1000.
    #[default]
    Desk,
    /// T, N in {50, 100, 200, 1000}, R = 10000.
    Full,
}

impl Scale {
    pub fn sizes(self) -> &'static [usize] {
        match self {
            Scale::Desk => &[50, 100],
            Scale::Full => &[50, 100, 200, 1000],
        }
    }

    pub fn replications(self) -> usize {
        match self {
            Scale::Desk => 1000,
            Scale::Full => 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Table1Config {
    pub scale: Scale,
    /// Overrides the scale's replication count.
    pub replications: Option<usize>,
    pub structural_seed: u64,
    pub noise_seed: u64,
    pub workers: usize,
    pub designs: Vec<Design>,
    /// Restricts the grid to these (T, N) pairs when set.
    pub sizes: Option<Vec<(usize, usize)>>,
}

impl Default for Table1Config {
    fn default() -> Self {
        Self {
            scale: Scale::Desk,
            replications: None,
            structural_seed: 1,
            noise_seed: 1,
            workers: default_workers(),
            designs: vec![Design::Hom, Design::Het],
            sizes: None,
        }
    }
}

/// Column order IFE, GSC, SC, DSC, SDiD. IFE gets the extended factor count
/// of the design, GSC the untreated one.
pub fn table1_estimators(dgp: &DgpSpec) -> Vec<EstimatorEntry> {
    vec![
        EstimatorEntry::new(EstimatorSpec::ife(dgp.extended_factor_count())),
        EstimatorEntry::new(EstimatorSpec::gsc(dgp.k0)),
        EstimatorEntry::new(EstimatorSpec::sc()),
        EstimatorEntry::new(EstimatorSpec::dsc()),
        EstimatorEntry::new(EstimatorSpec::sdid()),
    ]
}

pub fn table1_dgp(design: Design, t: usize, n: usize, structural_seed: u64, noise_seed: u64) -> DgpSpec {
    let base = match design {
        Design::Het => DgpSpec::het(n, t),
        _ => DgpSpec::hom(n, t),
    };
    base.with_seeds(structural_seed, noise_seed)
}

pub fn run_table1(cfg: &Table1Config) -> Result<SweepReport> {
    let reps = cfg.replications.unwrap_or(cfg.scale.replications());
    let grid: Vec<(usize, usize)> = match &cfg.sizes {
        Some(s) => s.clone(),
        None => {
            let sizes = cfg.scale.sizes();
            sizes.iter().flat_map(|&t| sizes.iter().map(move |&n| (t, n))).collect()
        }
    };
    let mut report = SweepReport::new(format!("ATT grid, R={reps}, mean (sd)"));
    for &design in &cfg.designs {
        for &(t, n) in &grid {
            let dgp = table1_dgp(design, t, n, cfg.structural_seed, cfg.noise_seed);
            let mut exp = ExperimentConfig::new(dgp.clone(), table1_estimators(&dgp), reps);
            exp.workers = cfg.workers;
            report.cells.extend(run_sweep(&exp)?.cells);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn column_order_is_fixed() {
        let names: Vec<String> = table1_estimators(&DgpSpec::het(50, 50)).into_iter().map(|e| e.name).collect();
        assert_eq!(names, ["IFE", "GSC", "SC", "DSC", "SDiD"]);
        assert_eq!(table1_estimators(&DgpSpec::het(50, 50))[0].spec, EstimatorSpec::ife(3));
        assert_eq!(table1_estimators(&DgpSpec::hom(50, 50))[0].spec, EstimatorSpec::ife(1));
    }

    #[test]
    fn desk_grid_layout() {
        let cfg = Table1Config {
            replications: Some(1),
            sizes: Some(vec![(12, 10)]),
            ..Table1Config::default()
        };
        let report = run_table1(&cfg).unwrap();
        assert_eq!(report.cells.len(), 10);
        let wide = report.render_wide();
        let header = wide.lines().nth(1).unwrap();
        let tokens: Vec<&str> = header.split_whitespace().collect();
        assert_eq!(tokens, ["design", "T", "N", "IFE", "GSC", "SC", "DSC", "SDiD"]);
        assert_eq!(Scale::Desk.sizes(), &[50, 100]);
        assert_eq!(Scale::Full.replications(), 10_000);
    }
}
