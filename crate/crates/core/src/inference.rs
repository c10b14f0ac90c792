//! Permutation placebo tests under the sharp null of no effect.
//!
//! Each draw reassigns treatment to `N1` units chosen uniformly without
//! replacement, re-runs the estimator and records the statistic. The p-value
//! is the share of placebo statistics strictly above the observed one, with
//! no `+1` correction, so it can be exactly zero.

use nalgebra::DMatrix;
use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{EstimatorSpec, Fitted, StatisticKind};
use crate::panel::{AttEstimate, PanelData};
use crate::rng::{self, role};
use crate::scfamily::ImputationResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaceboDistribution {
    pub stats: Vec<f64>,
    pub observed: f64,
    pub p_value: f64,
    pub statistic_kind: StatisticKind,
    /// Estimator failures that were redrawn.
    pub failures: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlaceboOptions {
    /// Draw pseudo-treated units from the original controls only.
    pub controls_only: bool,
    /// Abort once failures exceed this share of attempted draws.
    pub max_failure_rate: f64,
}

impl Default for PlaceboOptions {
    fn default() -> Self {
        Self {
            controls_only: false,
            max_failure_rate: 0.05,
        }
    }
}

pub fn abs_att_statistic(estimate: &AttEstimate) -> f64 {
    estimate.att.abs()
}

/// `post_mspe / pre_mspe`, `+∞` when the pre-period fit is perfect but the
/// post gaps are not. Both zero gives 0.
pub fn mspe_ratio_statistic(result: &ImputationResult) -> f64 {
    ratio(result.post_mspe, result.pre_mspe)
}

fn ratio(post: f64, pre: f64) -> f64 {
    if pre > 0.0 {
        post / pre
    } else if post > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// MSPE ratio of an N1 x T gap matrix whose first `t0` columns are pre
/// periods.
pub fn mspe_ratio_from_gaps(gaps: &DMatrix<f64>, t0: usize) -> f64 {
    let t1 = gaps.ncols() - t0;
    let pre = gaps.columns(0, t0).norm_squared() / (gaps.nrows() * t0) as f64;
    let post = gaps.columns(t0, t1).norm_squared() / (gaps.nrows() * t1) as f64;
    ratio(post, pre)
}

pub fn statistic(fitted: &Fitted, kind: StatisticKind) -> Result<f64> {
    match kind {
        StatisticKind::AbsAtt => Ok(abs_att_statistic(fitted.estimate())),
        StatisticKind::MspeRatio => fitted
            .as_imputation()
            .map(mspe_ratio_statistic)
            .ok_or_else(|| Error::InvalidArgument("MSPE ratio needs an imputation estimator".into())),
    }
}

/// `(1/R) Σ_r 1(θ_r > θ_obs)`.
pub fn p_value(stats: &[f64], observed: f64) -> f64 {
    if stats.is_empty() {
        return f64::NAN;
    }
    stats.iter().filter(|&&s| s > observed).count() as f64 / stats.len() as f64
}

pub fn placebo_test(
    panel: &PanelData,
    estimator: &EstimatorSpec,
    kind: StatisticKind,
    reps: usize,
    seed: u64,
) -> Result<PlaceboDistribution> {
    placebo_test_with(panel, estimator, kind, reps, seed, &PlaceboOptions::default())
}

pub fn placebo_test_with(
    panel: &PanelData,
    estimator: &EstimatorSpec,
    kind: StatisticKind,
    reps: usize,
    seed: u64,
    opts: &PlaceboOptions,
) -> Result<PlaceboDistribution> {
    if reps == 0 {
        return Err(Error::InvalidArgument("placebo test needs R >= 1".into()));
    }
    let observed = statistic(&estimator.fit(panel)?, kind)?;
    let pool: Vec<usize> = if opts.controls_only {
        panel.control_units()
    } else {
        (0..panel.n()).collect()
    };
    let n1 = panel.n1();
    if pool.len() < n1 {
        return Err(Error::InvalidArgument(format!(
            "cannot draw {n1} pseudo-treated units from a pool of {}",
            pool.len()
        )));
    }
    // A single draw may fail repeatedly only if most draws fail; cap the
    // retries so a hopeless estimator aborts instead of spinning.
    let retry_cap = ((opts.max_failure_rate * reps as f64).floor() as usize) + 1;
    let draws: Vec<(Option<f64>, usize)> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut failures = 0;
            for attempt in 0..=retry_cap {
                let mut g = rng::stream(&[seed, role::PERMUTATION, r as u64, attempt as u64]);
                let mut chosen: Vec<usize> = index::sample(&mut g, pool.len(), n1).into_iter().map(|j| pool[j]).collect();
                chosen.sort_unstable();
                let outcome = panel
                    .with_treated(&chosen)
                    .and_then(|p| estimator.fit(&p))
                    .and_then(|f| statistic(&f, kind));
                match outcome {
                    Ok(s) => return (Some(s), failures),
                    Err(e) => {
                        log::warn!("placebo draw {r} attempt {attempt} failed: {e}");
                        failures += 1;
                    }
                }
            }
            (None, failures)
        })
        .collect();

    let failures: usize = draws.iter().map(|d| d.1).sum();
    let attempts = reps + failures;
    if draws.iter().any(|d| d.0.is_none()) || failures as f64 > opts.max_failure_rate * attempts as f64 {
        return Err(Error::InferenceAborted { failures, attempts });
    }
    let stats: Vec<f64> = draws.into_iter().map(|d| d.0.expect("checked")).collect();
    Ok(PlaceboDistribution {
        p_value: p_value(&stats, observed),
        stats,
        observed,
        statistic_kind: kind,
        failures,
    })
}
