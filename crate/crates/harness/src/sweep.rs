//! Seeded replication sweeps. Replication `r` depends only on the config and
//! `r`, results are collected in replication order, and aggregation runs on
//! one thread, so the report does not depend on the worker count.

use ifelab_core::dgp::{generate, DgpSpec};
use ifelab_core::estimator::{EstimatorSpec, Fitted};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::report::{CellSummary, Outcome, SweepReport};

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRecord {
    pub att: f64,
    pub converged: bool,
    pub d_of_f: Option<f64>,
    pub per_period: Option<Vec<f64>>,
}

impl EstimateRecord {
    fn from_fitted(f: &Fitted) -> Self {
        Self {
            att: f.att(),
            converged: f.converged(),
            d_of_f: f.as_ife().map(|r| r.d_of_f),
            per_period: f.estimate().per_period.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationRecord {
    pub rep: u64,
    pub true_att: f64,
    /// One entry per estimator, `None` when it failed.
    pub estimates: Vec<Option<EstimateRecord>>,
}

/// Runs `f(0..count)` on a pool of `workers` threads (0 = rayon default) and
/// returns the results in index order.
pub fn par_indexed<T, F>(workers: usize, count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    Ok(pool.install(|| (0..count).into_par_iter().map(f).collect()))
}

pub fn run_replications(
    dgp: &DgpSpec,
    estimators: &[EstimatorSpec],
    reps: usize,
    workers: usize,
) -> Result<Vec<ReplicationRecord>> {
    dgp.validate()?;
    let records = par_indexed(workers, reps, |idx| {
        let rep = idx as u64 + 1;
        let g = generate(dgp, rep)?;
        let estimates = estimators
            .iter()
            .map(|e| match e.fit(&g.panel) {
                Ok(f) => Some(EstimateRecord::from_fitted(&f)),
                Err(err) => {
                    log::warn!("replication {rep}: {} failed: {err}", e.label());
                    None
                }
            })
            .collect();
        Ok::<_, HarnessError>(ReplicationRecord {
            rep,
            true_att: g.true_att,
            estimates,
        })
    })?;
    records.into_iter().collect()
}

/// Cells for each estimator over `records` using `value` to pick the
/// reported quantity and `truth` for its target.
pub fn summarize<V, T>(dgp: &DgpSpec, names: &[String], records: &[ReplicationRecord], value: V, truth: T) -> Vec<CellSummary>
where
    V: Fn(&EstimateRecord) -> Option<f64>,
    T: Fn(&ReplicationRecord) -> f64,
{
    names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let outcomes: Vec<(Outcome, f64)> = records
                .iter()
                .map(|r| {
                    let outcome = match r.estimates[j].as_ref().and_then(|e| value(e).map(|v| (v, e.converged))) {
                        Some((v, converged)) if v.is_finite() => Outcome::Estimate { value: v, converged },
                        _ => Outcome::Failed,
                    };
                    (outcome, truth(r))
                })
                .collect();
            CellSummary::from_outcomes(dgp.design.label(), dgp.t, dgp.n, name, &outcomes)
        })
        .collect()
}

fn sweep_title(dgp: &DgpSpec, reps: usize) -> String {
    format!(
        "{} T={} N={} N1={} T0={} R={}",
        dgp.design.label(),
        dgp.t,
        dgp.n,
        dgp.n1,
        dgp.t0,
        reps
    )
}

pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepReport> {
    config.validate()?;
    let specs: Vec<EstimatorSpec> = config.estimators.iter().map(|e| e.spec.clone()).collect();
    let names: Vec<String> = config.estimators.iter().map(|e| e.name.clone()).collect();
    let records = run_replications(&config.dgp, &specs, config.replications, config.workers)?;
    let mut report = SweepReport::new(sweep_title(&config.dgp, config.replications));
    report.cells = summarize(&config.dgp, &names, &records, |e| Some(e.att), |r| r.true_att);
    Ok(report)
}
