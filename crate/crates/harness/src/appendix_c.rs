//! Time-invariant heterogeneity: the IFE estimate's distribution and how its
//! dispersion depends on the collinearity diagnostic `D(F̂)`.

use std::fmt::Write as _;

use ifelab_core::dgp::DgpSpec;
use ifelab_core::estimator::EstimatorSpec;
use serde::{Deserialize, Serialize};

use crate::config::default_workers;
use crate::error::{HarnessError, Result};
use crate::report::{mean_sd, SweepReport};
use crate::sweep::{run_replications, summarize};

const MU: [f64; 3] = [0.5, 1.0, -0.5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AppendixCConfig {
    /// 0 runs the homogeneous control design.
    pub k_alpha: usize,
    pub n: usize,
    pub t: usize,
    pub replications: usize,
    pub structural_seed: u64,
    pub noise_seed: u64,
    pub workers: usize,
    pub bins: usize,
    /// IFE factor count; defaults to the design's nominal extended count.
    pub k: Option<usize>,
}

impl Default for AppendixCConfig {
    fn default() -> Self {
        Self {
            k_alpha: 2,
            n: 50,
            t: 50,
            replications: 1000,
            structural_seed: 1,
            noise_seed: 1,
            workers: default_workers(),
            bins: 40,
            k: None,
        }
    }
}

impl AppendixCConfig {
    pub fn dgp(&self) -> DgpSpec {
        let base = if self.k_alpha == 0 {
            DgpSpec::hom(self.n, self.t)
        } else {
            DgpSpec::inv(self.n, self.t, self.k_alpha)
        };
        base.with_seeds(self.structural_seed, self.noise_seed)
    }

    /// Expected ATT of the design: `Σ_{j ≤ k_alpha} μ_j / 2`, or 2 for the
    /// homogeneous control.
    pub fn reference_att(&self) -> f64 {
        if self.k_alpha == 0 {
            2.0
        } else {
            MU[..self.k_alpha.min(3)].iter().sum::<f64>() / 2.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn new(values: &[f64], bins: usize) -> Self {
        let bins = bins.max(1);
        let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        let (mut lo, mut hi) = finite
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        if finite.is_empty() {
            (lo, hi) = (0.0, 1.0);
        } else if hi - lo <= 0.0 {
            lo -= 0.5;
            hi += 0.5;
        }
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0; bins];
        for v in finite {
            let b = (((v - lo) / width).floor() as usize).min(bins - 1);
            counts[b] += 1;
        }
        Self { lo, hi, counts }
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    pub fn bin_of(&self, v: f64) -> Option<usize> {
        if v < self.lo || v > self.hi {
            return None;
        }
        Some((((v - self.lo) / self.width()).floor() as usize).min(self.counts.len() - 1))
    }

    /// Local maxima of the `window`-bin moving average that reach at least
    /// `min_share` of its maximum.
    pub fn peak_count(&self, window: usize, min_share: f64) -> usize {
        let m = self.counts.len();
        let half = window / 2;
        let smooth: Vec<f64> = (0..m)
            .map(|j| {
                let a = j.saturating_sub(half);
                let b = (j + half + 1).min(m);
                self.counts[a..b].iter().sum::<usize>() as f64 / (b - a) as f64
            })
            .collect();
        let top = smooth.iter().cloned().fold(0.0, f64::max);
        let mut peaks = 0;
        let mut j = 0;
        while j < m {
            // plateau [j, e)
            let mut e = j + 1;
            while e < m && smooth[e] == smooth[j] {
                e += 1;
            }
            let left = j == 0 || smooth[j - 1] < smooth[j];
            let right = e == m || smooth[e] < smooth[j];
            if left && right && smooth[j] >= min_share * top && smooth[j] > 0.0 {
                peaks += 1;
            }
            j = e;
        }
        peaks
    }

    fn render_into(&self, out: &mut String, name: &str) {
        writeln!(out, "[{name}]").unwrap();
        writeln!(out, "# lo hi count").unwrap();
        let w = self.width();
        for (j, c) in self.counts.iter().enumerate() {
            let a = self.lo + j as f64 * w;
            writeln!(out, "{:.6} {:.6} {c}", a, a + w).unwrap();
        }
    }
}

/// Dispersion of `α̂` within one quartile of `D(F̂)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuartileRow {
    pub quartile: usize,
    pub d_lo: f64,
    pub d_hi: f64,
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
}

/// Splits `(d, alpha)` pairs into four groups by `d` (ascending).
pub fn quartile_table(pairs: &[(f64, f64)]) -> Vec<QuartileRow> {
    let mut sorted: Vec<(f64, f64)> = pairs.iter().copied().filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let m = sorted.len();
    (0..4)
        .filter_map(|q| {
            let a = q * m / 4;
            let b = (q + 1) * m / 4;
            if a == b {
                return None;
            }
            let alphas: Vec<f64> = sorted[a..b].iter().map(|p| p.1).collect();
            let (mean, sd) = mean_sd(&alphas);
            Some(QuartileRow {
                quartile: q + 1,
                d_lo: sorted[a].0,
                d_hi: sorted[b - 1].0,
                count: b - a,
                mean,
                sd,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AppendixCOutput {
    pub report: SweepReport,
    pub alpha_hist: Histogram,
    pub d_hist: Histogram,
    pub quartiles: Vec<QuartileRow>,
    pub reference_att: f64,
    pub alphas: Vec<f64>,
    pub d_values: Vec<f64>,
}

impl AppendixCOutput {
    /// SD in the lowest `D(F̂)` quartile over SD in the highest.
    pub fn dispersion_ratio(&self) -> f64 {
        match (self.quartiles.first(), self.quartiles.last()) {
            (Some(lo), Some(hi)) if self.quartiles.len() == 4 => lo.sd / hi.sd,
            _ => f64::NAN,
        }
    }

    pub fn render_bins(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# reference_att {:.6}", self.reference_att).unwrap();
        if let Some(b) = self.alpha_hist.bin_of(self.reference_att) {
            writeln!(out, "# reference_bin {b}").unwrap();
        }
        self.alpha_hist.render_into(&mut out, "alpha_hat");
        self.d_hist.render_into(&mut out, "d_of_f");
        out
    }

    pub fn render_text(&self) -> String {
        let mut out = self.report.render_text();
        writeln!(out).unwrap();
        writeln!(out, "reference ATT {:.4}", self.reference_att).unwrap();
        writeln!(out, "alpha_hat by D(F) quartile").unwrap();
        writeln!(out, "{:>8} {:>12} {:>12} {:>6} {:>10} {:>10}", "quartile", "D_lo", "D_hi", "n", "mean", "sd").unwrap();
        for q in &self.quartiles {
            writeln!(
                out,
                "{:>8} {:>12.4e} {:>12.4e} {:>6} {:>10.4} {:>10.4}",
                q.quartile, q.d_lo, q.d_hi, q.count, q.mean, q.sd
            )
            .unwrap();
        }
        writeln!(out, "bottom/top quartile SD ratio {:.3}", self.dispersion_ratio()).unwrap();
        out
    }
}

pub fn run_appendix_c(cfg: &AppendixCConfig) -> Result<AppendixCOutput> {
    if cfg.k_alpha > 3 {
        return Err(HarnessError::Config("k_alpha must be in 0..=3".into()));
    }
    if cfg.replications == 0 {
        return Err(HarnessError::Config("replications must be >= 1".into()));
    }
    let dgp = cfg.dgp();
    let k = cfg.k.unwrap_or(dgp.extended_factor_count());
    let records = run_replications(&dgp, &[EstimatorSpec::ife(k)], cfg.replications, cfg.workers)?;
    let name = format!("IFE(k={k})");
    let mut report = SweepReport::new(format!(
        "time-invariant heterogeneity, k_alpha={}, T={} N={} R={}",
        cfg.k_alpha, cfg.t, cfg.n, cfg.replications
    ));
    report.cells = summarize(&dgp, &[name], &records, |e| Some(e.att), |r| r.true_att);

    let pairs: Vec<(f64, f64)> = records
        .iter()
        .filter_map(|r| r.estimates[0].as_ref())
        .filter(|e| e.converged)
        .map(|e| (e.d_of_f.unwrap_or(f64::NAN), e.att))
        .collect();
    let alphas: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let d_values: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    Ok(AppendixCOutput {
        report,
        alpha_hist: Histogram::new(&alphas, cfg.bins),
        d_hist: Histogram::new(&d_values, cfg.bins),
        quartiles: quartile_table(&pairs),
        reference_att: cfg.reference_att(),
        alphas,
        d_values,
    })
}
