//! Interactive fixed effects estimation by alternating least squares.
//!
//! The objective is `SSE(β, F) = Σ_i (Y_i - X_i β)' M_F (Y_i - X_i β)` where
//! the regressors `X_i` stack the treatment dummy (static) or one dummy per
//! post-treatment period (dynamic) with any covariates. Each iteration
//! solves the pooled least-squares problem for `β` given `F`, then re-extracts
//! `F` by principal components of the residualized outcomes. Both half steps
//! are exact minimizations, so the SSE never increases.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factor::{d_functional, principal_factors_hinted, FactorBasis, FactorModel};
use crate::panel::{AttEstimate, PanelData};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Specification {
    /// One coefficient on the treatment dummy.
    #[default]
    Static,
    /// One coefficient per post-treatment period.
    Dynamic,
}

/// Additive effects removed before the factor search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AdditiveEffects {
    #[default]
    None,
    /// Unit and period fixed effects, swept out by double demeaning. Exact:
    /// the additive terms span the orthogonal complement of the
    /// doubly-centered matrices, and centering preserves rank-k structure.
    TwoWay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IfeConfig {
    pub k: usize,
    pub spec: Specification,
    pub max_iters: usize,
    pub tol: f64,
    pub restarts: usize,
    pub seed: u64,
    pub additive: AdditiveEffects,
}

impl Default for IfeConfig {
    fn default() -> Self {
        Self {
            k: 1,
            spec: Specification::Static,
            max_iters: 1000,
            tol: 1e-9,
            restarts: 5,
            seed: 0,
            additive: AdditiveEffects::None,
        }
    }
}

impl IfeConfig {
    pub fn with_k(k: usize) -> Self {
        Self {
            k,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be >= 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("tol must be positive".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidArgument("restarts must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct IfeResult {
    pub estimate: AttEstimate,
    pub factor_model: FactorModel,
    pub sse: f64,
    pub d_of_f: f64,
    pub converged: bool,
    pub iterations: usize,
    pub coef_covariates: Option<Vec<f64>>,
    /// Set when some step found the projected treatment regressor nearly
    /// inside the factor space and kept the previous coefficients.
    pub degenerate_design: bool,
    /// SSE after every half step of the winning restart.
    pub sse_path: Vec<f64>,
    /// Index of the winning restart (0 = principal-components warm start).
    pub restart: usize,
}

impl IfeResult {
    pub fn att(&self) -> f64 {
        self.estimate.att
    }
}

/// A regressor matrix. Treatment dummies are stored as outer products.
#[derive(Debug, Clone)]
enum Regressor {
    RankOne { unit: DVector<f64>, time: DVector<f64> },
    Dense(DMatrix<f64>),
}

impl Regressor {
    fn frobenius_dot(&self, other: &Regressor) -> f64 {
        match (self, other) {
            (Regressor::RankOne { unit: u1, time: v1 }, Regressor::RankOne { unit: u2, time: v2 }) => {
                u1.dot(u2) * v1.dot(v2)
            }
            (Regressor::RankOne { unit, time }, Regressor::Dense(m))
            | (Regressor::Dense(m), Regressor::RankOne { unit, time }) => unit.dot(&(m * time)),
            (Regressor::Dense(a), Regressor::Dense(b)) => a.dot(b),
        }
    }

    fn dot_matrix(&self, m: &DMatrix<f64>) -> f64 {
        match self {
            Regressor::RankOne { unit, time } => unit.dot(&(m * time)),
            Regressor::Dense(a) => a.dot(m),
        }
    }

    /// `X Q`, N x k.
    fn times(&self, q: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Regressor::RankOne { unit, time } => unit * (q.tr_mul(time)).transpose(),
            Regressor::Dense(a) => a * q,
        }
    }

    fn axpy_into(&self, coef: f64, out: &mut DMatrix<f64>) {
        match self {
            Regressor::RankOne { unit, time } => out.ger(coef, unit, time, 1.0),
            Regressor::Dense(a) => *out += a * coef,
        }
    }

    fn demeaned(&self) -> Regressor {
        fn center(v: &DVector<f64>) -> DVector<f64> {
            let m = v.mean();
            v.map(|x| x - m)
        }
        match self {
            Regressor::RankOne { unit, time } => Regressor::RankOne {
                unit: center(unit),
                time: center(time),
            },
            Regressor::Dense(a) => Regressor::Dense(double_demean(a)),
        }
    }
}

fn double_demean(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, t) = a.shape();
    let row_means: Vec<f64> = (0..n).map(|i| a.row(i).mean()).collect();
    let col_means: Vec<f64> = (0..t).map(|s| a.column(s).mean()).collect();
    let grand = a.mean();
    DMatrix::from_fn(n, t, |i, s| a[(i, s)] - row_means[i] - col_means[s] + grand)
}

/// Outcomes and stacked regressors, with cross products precomputed.
struct Design {
    y: DMatrix<f64>,
    regressors: Vec<Regressor>,
    /// Leading regressors that carry treatment effects.
    n_treatment: usize,
    xx: DMatrix<f64>,
    xy: DVector<f64>,
}

impl Design {
    fn new(panel: &PanelData, spec: Specification, additive: AdditiveEffects) -> Self {
        let d_unit = panel.unit_indicator();
        let mut regressors = match spec {
            Specification::Static => vec![Regressor::RankOne {
                unit: d_unit,
                time: panel.period_indicator(),
            }],
            Specification::Dynamic => (panel.t0()..panel.t())
                .map(|s| {
                    let mut time = DVector::zeros(panel.t());
                    time[s] = 1.0;
                    Regressor::RankOne {
                        unit: d_unit.clone(),
                        time,
                    }
                })
                .collect(),
        };
        let n_treatment = regressors.len();
        regressors.extend(panel.covariates().iter().cloned().map(Regressor::Dense));
        let mut y = panel.outcomes().clone();
        if additive == AdditiveEffects::TwoWay {
            y = double_demean(&y);
            regressors = regressors.iter().map(Regressor::demeaned).collect();
        }
        let p = regressors.len();
        let xx = DMatrix::from_fn(p, p, |r, q| regressors[r].frobenius_dot(&regressors[q]));
        let xy = DVector::from_fn(p, |r, _| regressors[r].dot_matrix(&y));
        Self {
            y,
            regressors,
            n_treatment,
            xx,
            xy,
        }
    }

    fn p(&self) -> usize {
        self.regressors.len()
    }

    fn residualize(&self, beta: &DVector<f64>) -> DMatrix<f64> {
        let mut w = self.y.clone();
        for (x, &b) in self.regressors.iter().zip(beta.iter()) {
            x.axpy_into(-b, &mut w);
        }
        w
    }

    /// Least-squares coefficients given the factor space. Returns `None`
    /// when a projected treatment regressor has (near) zero variation.
    fn coefficients(&self, basis: &FactorBasis) -> Option<DVector<f64>> {
        let q = basis.q();
        let p = self.p();
        let (mut a, mut b) = (self.xx.clone(), self.xy.clone());
        if q.ncols() > 0 {
            let yq = &self.y * q;
            let xq: Vec<DMatrix<f64>> = self.regressors.iter().map(|x| x.times(q)).collect();
            for r in 0..p {
                b[r] -= xq[r].dot(&yq);
                for c in r..p {
                    let v = xq[r].dot(&xq[c]);
                    a[(r, c)] -= v;
                    if c != r {
                        a[(c, r)] -= v;
                    }
                }
            }
        }
        let floor = 1e-8 * (self.y.nrows() * self.y.ncols()) as f64;
        if (0..self.n_treatment).any(|r| a[(r, r)] < floor) {
            return None;
        }
        a.cholesky().map(|c| c.solve(&b))
    }
}

/// Evaluates `Σ_i (Y_i - α D_i)' M_F (Y_i - α D_i)` for any full-rank `F`.
pub fn sse(panel: &PanelData, alpha: f64, f: &DMatrix<f64>) -> Result<f64> {
    if f.nrows() != panel.t() {
        return Err(Error::DimensionMismatch(format!(
            "F has {} rows, panel has {} periods",
            f.nrows(),
            panel.t()
        )));
    }
    let basis = FactorBasis::from_factors(f)?;
    let mut w = panel.outcomes().clone();
    w.ger(-alpha, &panel.unit_indicator(), &panel.period_indicator(), 1.0);
    let wq = &w * basis.q();
    Ok((w.norm_squared() - wq.norm_squared()).max(0.0))
}

struct Run {
    beta: DVector<f64>,
    model: FactorModel,
    residual: DMatrix<f64>,
    sse: f64,
    sse_path: Vec<f64>,
    converged: bool,
    degenerate: bool,
    iterations: usize,
}

fn alternate(design: &Design, cfg: &IfeConfig, init: DVector<f64>, warm: bool) -> Result<Run> {
    let k = cfg.k;
    let mut beta = init;
    let mut degenerate = false;
    let mut sse_path = Vec::new();

    let first = if warm { design.y.clone() } else { design.residualize(&beta) };
    let (mut model, explained) = principal_factors_hinted(&first, k, None)?;
    // Warm start is the same as starting from β = 0.
    sse_path.push((first.norm_squared() - explained).max(0.0));

    let mut last: Option<f64> = None;
    let mut converged = false;
    let mut iterations = 0;
    let mut residual_w;
    loop {
        iterations += 1;
        let basis = FactorBasis::from_normalized(model.factors());
        match design.coefficients(&basis) {
            Some(b) => beta = b,
            None => degenerate = true,
        }
        residual_w = design.residualize(&beta);
        let wq = &residual_w * basis.q();
        let sse_a = (residual_w.norm_squared() - wq.norm_squared()).max(0.0);
        sse_path.push(sse_a);
        if let Some(prev) = last {
            if (prev - sse_a).abs() <= cfg.tol * prev.max(f64::MIN_POSITIVE) || sse_a == 0.0 {
                converged = true;
                break;
            }
        }
        last = Some(sse_a);
        if iterations >= cfg.max_iters {
            break;
        }
        let (next, explained) = principal_factors_hinted(&residual_w, k, Some(model.factors()))?;
        model = next;
        sse_path.push((residual_w.norm_squared() - explained).max(0.0));
    }
    // Loadings consistent with the final coefficients.
    let loadings = &residual_w * model.factors() / design.y.ncols() as f64;
    let model = FactorModel::new(model.factors().clone(), loadings)?;
    let residual = &residual_w - model.common_component();
    Ok(Run {
        sse: *sse_path.last().unwrap_or(&0.0),
        beta,
        model,
        residual,
        sse_path,
        converged,
        degenerate,
        iterations,
    })
}

/// Plain two-by-two difference in treated/control, pre/post means.
pub fn naive_did(panel: &PanelData) -> f64 {
    let y = panel.outcomes();
    let (t0, t) = (panel.t0(), panel.t());
    let mean = |units: &[usize], range: std::ops::Range<usize>| {
        let len = range.len();
        units.iter().map(|&i| y.row(i).columns_range(range.clone()).sum()).sum::<f64>()
            / (units.len() * len) as f64
    };
    let (tr, co) = (panel.treated_units(), panel.control_units());
    (mean(&tr, t0..t) - mean(&tr, 0..t0)) - (mean(&co, t0..t) - mean(&co, 0..t0))
}

fn outcome_sd(panel: &PanelData) -> f64 {
    let y = panel.outcomes();
    let m = y.mean();
    (y.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (y.len() as f64 - 1.0).max(1.0)).sqrt()
}

fn fit(panel: &PanelData, cfg: &IfeConfig) -> Result<IfeResult> {
    cfg.validate()?;
    if cfg.k > panel.n().min(panel.t()) {
        return Err(Error::TooManyFactors {
            k: cfg.k,
            rows: panel.n(),
            cols: panel.t(),
        });
    }
    let design = Design::new(panel, cfg.spec, cfg.additive);
    let p = design.p();
    let did = naive_did(panel);
    let spread = 2.0 * outcome_sd(panel);

    let mut best: Option<(usize, Run)> = None;
    for restart in 0..cfg.restarts {
        let run = if restart == 0 {
            alternate(&design, cfg, DVector::zeros(p), true)?
        } else {
            let mut r = rng::stream(&[cfg.seed, rng::role::IFE_RESTART, restart as u64]);
            let alpha0 = did + spread * r.random_range(-1.0..=1.0);
            let mut init = DVector::zeros(p);
            init.rows_mut(0, design.n_treatment).fill(alpha0);
            alternate(&design, cfg, init, false)?
        };
        let better = match &best {
            None => true,
            Some((_, b)) => run.sse < b.sse,
        };
        if better {
            best = Some((restart, run));
        }
    }
    let (restart, run) = best.expect("restarts >= 1");

    let treatment: Vec<f64> = run.beta.rows(0, design.n_treatment).iter().copied().collect();
    let mut estimate = match cfg.spec {
        Specification::Static => AttEstimate::new(treatment[0]),
        Specification::Dynamic => AttEstimate::from_per_period(treatment.clone()),
    };
    let coef_covariates = (p > design.n_treatment)
        .then(|| run.beta.rows(design.n_treatment, p - design.n_treatment).iter().copied().collect());

    let treated = panel.treated_units();
    let (t0, t1) = (panel.t0(), panel.t1());
    estimate.counterfactuals = Some(DMatrix::from_fn(treated.len(), t1, |r, c| {
        let (i, s) = (treated[r], t0 + c);
        let effect = match cfg.spec {
            Specification::Static => treatment[0],
            Specification::Dynamic => treatment[c],
        };
        panel.outcomes()[(i, s)] - effect - run.residual[(i, s)]
    }));

    let d_of_f = match d_functional(run.model.factors(), panel, run.model.loadings()) {
        Ok(d) => d,
        Err(_) => f64::NAN,
    };
    let diag = &mut estimate.diagnostics;
    diag.insert("d_of_F".into(), d_of_f);
    diag.insert("sse".into(), run.sse);
    diag.insert("iterations".into(), run.iterations as f64);
    diag.insert("converged".into(), f64::from(u8::from(run.converged)));
    diag.insert("degenerate_design".into(), f64::from(u8::from(run.degenerate)));
    diag.insert("restart".into(), restart as f64);
    diag.insert("k".into(), cfg.k as f64);

    Ok(IfeResult {
        estimate,
        factor_model: run.model,
        sse: run.sse,
        d_of_f,
        converged: run.converged,
        iterations: run.iterations,
        coef_covariates,
        degenerate_design: run.degenerate,
        sse_path: run.sse_path,
        restart,
    })
}

/// Static specification: a single coefficient on `d_{i,t}`.
pub fn fit_static(panel: &PanelData, cfg: &IfeConfig) -> Result<IfeResult> {
    fit(
        panel,
        &IfeConfig {
            spec: Specification::Static,
            ..cfg.clone()
        },
    )
}

/// Dynamic specification: coefficients `ψ_s` on `1(t = s) d_{i,t}` for each
/// post-treatment period; the ATT is their mean.
pub fn fit_dynamic(panel: &PanelData, cfg: &IfeConfig) -> Result<IfeResult> {
    fit(
        panel,
        &IfeConfig {
            spec: Specification::Dynamic,
            ..cfg.clone()
        },
    )
}

/// Dispatches on `cfg.spec`.
pub fn fit_ife(panel: &PanelData, cfg: &IfeConfig) -> Result<IfeResult> {
    fit(panel, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::StandardNormal;

    fn factor_panel(n: usize, t: usize, n1: usize, t0: usize, alpha: f64, noise: f64, seed: u64) -> PanelData {
        let mut r = rng::stream(&[seed, 1]);
        let lam = DMatrix::from_fn(n, 1, |_, _| r.sample::<f64, _>(StandardNormal));
        let f = DMatrix::from_fn(t, 1, |_, _| 1.0 + r.sample::<f64, _>(StandardNormal));
        let mut y = &lam * f.transpose();
        for i in 0..n {
            for s in 0..t {
                y[(i, s)] += noise * r.sample::<f64, _>(StandardNormal);
                if i < n1 && s >= t0 {
                    y[(i, s)] += alpha;
                }
            }
        }
        PanelData::new(y, &(0..n1).collect::<Vec<_>>(), t0).unwrap()
    }

    #[test]
    fn noiseless_no_factors_recovers_alpha() {
        let mut y = DMatrix::zeros(5, 4);
        for i in 0..2 {
            for s in 2..4 {
                y[(i, s)] = 2.0;
            }
        }
        let panel = PanelData::new(y, &[0, 1], 2).unwrap();
        let res = fit_static(&panel, &IfeConfig::with_k(0)).unwrap();
        assert!((res.att() - 2.0).abs() < 1e-10);
        assert!(res.converged);
    }

    #[test]
    fn dynamic_noiseless_recovers_path() {
        let (n, t, t0) = (6, 7, 3);
        let y = DMatrix::from_fn(n, t, |i, s| if i < 2 && s >= t0 { (s - t0 + 1) as f64 } else { 0.0 });
        let panel = PanelData::new(y, &[0, 1], t0).unwrap();
        let res = fit_dynamic(&panel, &IfeConfig::with_k(0)).unwrap();
        let pp = res.estimate.per_period.clone().unwrap();
        for (j, v) in pp.iter().enumerate() {
            assert!((v - (j + 1) as f64).abs() < 1e-10);
        }
        assert!((res.att() - 2.5).abs() < 1e-10);
    }

    #[test]
    fn sse_zero_at_truth_and_plain_rss_without_factors() {
        let (n, t) = (6, 5);
        let mut r = rng::stream(&[3]);
        let lam = DMatrix::from_fn(n, 2, |_, _| r.sample::<f64, _>(StandardNormal));
        let f = DMatrix::from_fn(t, 2, |_, _| r.sample::<f64, _>(StandardNormal));
        let mut y = &lam * f.transpose();
        for i in 0..2 {
            for s in 3..t {
                y[(i, s)] += 1.5;
            }
        }
        let panel = PanelData::new(y.clone(), &[0, 1], 3).unwrap();
        assert!(sse(&panel, 1.5, &f).unwrap() < 1e-10);
        let rss = sse(&panel, 0.0, &DMatrix::zeros(t, 0)).unwrap();
        assert!((rss - y.norm_squared()).abs() < 1e-10);
        assert!(sse(&panel, 0.0, &DMatrix::zeros(t + 1, 1)).is_err());
    }

    #[test]
    fn sse_path_is_monotone() {
        let panel = factor_panel(20, 12, 6, 6, 1.0, 0.5, 4);
        let cfg = IfeConfig { restarts: 3, ..IfeConfig::with_k(2) };
        let res = fit_static(&panel, &cfg).unwrap();
        for w in res.sse_path.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12, "{w:?}");
        }
    }

    #[test]
    fn recovers_homogeneous_effect_with_factor() {
        let panel = factor_panel(40, 30, 10, 15, 2.0, 0.1, 5);
        let res = fit_static(&panel, &IfeConfig::with_k(1)).unwrap();
        assert!((res.att() - 2.0).abs() < 0.05, "{}", res.att());
        assert!(res.d_of_f > 0.0);
        let cf = res.estimate.counterfactuals.as_ref().unwrap();
        assert_eq!(cf.shape(), (10, 15));
    }

    #[test]
    fn covariate_coefficients_recovered() {
        let (n, t) = (30, 20);
        let mut r = rng::stream(&[6]);
        let z = DMatrix::from_fn(n, t, |_, _| r.sample::<f64, _>(StandardNormal));
        let base = factor_panel(n, t, 8, 10, 1.0, 0.05, 7);
        let y = base.outcomes() + &z * 3.0;
        let panel = base.with_outcomes(y).unwrap().with_covariates(vec![z]).unwrap();
        let res = fit_static(&panel, &IfeConfig::with_k(1)).unwrap();
        let delta = res.coef_covariates.clone().unwrap();
        assert!((delta[0] - 3.0).abs() < 0.02, "{delta:?}");
        assert!((res.att() - 1.0).abs() < 0.05);
    }

    #[test]
    fn two_way_effects_are_absorbed() {
        let (n, t) = (30, 20);
        let mut r = rng::stream(&[8]);
        let a: Vec<f64> = (0..n).map(|_| 5.0 * r.sample::<f64, _>(StandardNormal)).collect();
        let b: Vec<f64> = (0..t).map(|_| 5.0 * r.sample::<f64, _>(StandardNormal)).collect();
        let base = factor_panel(n, t, 8, 10, 1.0, 0.05, 9);
        let y = DMatrix::from_fn(n, t, |i, s| base.outcomes()[(i, s)] + a[i] + b[s]);
        let panel = base.with_outcomes(y).unwrap();
        let cfg = IfeConfig {
            additive: AdditiveEffects::TwoWay,
            ..IfeConfig::with_k(1)
        };
        let res = fit_static(&panel, &cfg).unwrap();
        assert!((res.att() - 1.0).abs() < 0.05, "{}", res.att());
    }

    #[test]
    fn config_validation() {
        let panel = factor_panel(6, 6, 2, 3, 1.0, 1.0, 1);
        for cfg in [
            IfeConfig { max_iters: 0, ..IfeConfig::default() },
            IfeConfig { tol: 0.0, ..IfeConfig::default() },
            IfeConfig { restarts: 0, ..IfeConfig::default() },
            IfeConfig::with_k(7),
        ] {
            assert!(fit_static(&panel, &cfg).is_err());
        }
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let panel = factor_panel(20, 12, 6, 6, 1.0, 1.0, 10);
        let cfg = IfeConfig { max_iters: 1, restarts: 1, ..IfeConfig::with_k(2) };
        let res = fit_static(&panel, &cfg).unwrap();
        assert!(!res.converged);
        assert_eq!(res.iterations, 1);
    }

    #[test]
    fn degenerate_design_is_flagged_not_fatal() {
        // k = T leaves nothing after projecting on the factor space.
        let panel = factor_panel(8, 4, 3, 2, 1.0, 1.0, 11);
        let res = fit_static(&panel, &IfeConfig::with_k(4)).unwrap();
        assert!(res.degenerate_design);
        assert_eq!(res.estimate.diagnostic("degenerate_design"), Some(1.0));
    }
}
