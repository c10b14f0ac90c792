//! Counterfactual-imputation estimators: synthetic control (SC), demeaned SC
//! (DSC), generalized SC (GSC) and synthetic difference-in-differences
//! (SDiD). None of them reads treated post-treatment outcomes when fitting
//! weights, factors or loadings; those cells enter only through the final
//! gap average.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factor::{principal_factors, FactorModel};
use crate::panel::{AttEstimate, PanelData};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "sc")]
    Sc,
    #[serde(rename = "dsc")]
    Dsc,
    #[serde(rename = "gsc")]
    Gsc,
    #[serde(rename = "sdid")]
    Sdid,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Sc => "SC",
            Method::Dsc => "DSC",
            Method::Gsc => "GSC",
            Method::Sdid => "SDiD",
        }
    }
}

/// Whether SC matches each treated unit separately or the treated average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScTarget {
    #[default]
    PerUnit,
    TreatedAverage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Stop once the Frank–Wolfe gap is below `tol · (1 + b'b)`.
    pub tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 20_000,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ScConfig {
    pub target: ScTarget,
    pub solver: SolverConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexSolution {
    pub weights: DVector<f64>,
    pub objective: f64,
    /// Frank–Wolfe duality gap at `weights`.
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// `min_w w'Gw - 2c'w + const` over the probability simplex, for a fixed
/// positive semidefinite `G`. One instance serves every right-hand side that
/// shares the design, which is the common case (all treated units share the
/// donor pool).
#[derive(Debug, Clone)]
pub struct SimplexQp {
    gram: DMatrix<f64>,
    lipschitz: f64,
}

impl SimplexQp {
    /// Least squares `‖b - Aw‖²`: `G = A'A`.
    pub fn from_design(a: &DMatrix<f64>) -> Self {
        Self::from_gram(a.transpose() * a)
    }

    pub fn from_gram(gram: DMatrix<f64>) -> Self {
        let top = if gram.nrows() == 0 {
            0.0
        } else {
            gram.clone().symmetric_eigenvalues().max()
        };
        Self {
            gram,
            lipschitz: 2.0 * top.max(0.0),
        }
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    pub fn objective(&self, w: &DVector<f64>, c: &DVector<f64>, constant: f64) -> f64 {
        (w.dot(&(&self.gram * w)) - 2.0 * c.dot(w) + constant).max(0.0)
    }

    fn gap(&self, w: &DVector<f64>, c: &DVector<f64>) -> f64 {
        let g = 2.0 * (&self.gram * w - c);
        (g.dot(w) - g.min()).max(0.0)
    }

    /// Accelerated projected gradient with adaptive restart. Every few
    /// iterations the equality-constrained optimum on the current support is
    /// tried; when the support is right this lands on the exact solution.
    pub fn solve(&self, c: &DVector<f64>, constant: f64, cfg: &SolverConfig) -> SimplexSolution {
        let m = self.dim();
        assert_eq!(c.len(), m, "linear term length");
        let threshold = cfg.tol * (1.0 + constant.abs());
        let mut w = DVector::from_element(m, 1.0 / m as f64);
        if m == 1 || self.lipschitz == 0.0 {
            let mut best = w.clone();
            if m > 1 {
                // G = 0: linear objective, optimum at the vertex of largest c.
                best.fill(0.0);
                best[c.imax()] = 1.0;
            }
            return self.finish(best, c, constant, 0, true);
        }
        let step = 1.0 / self.lipschitz;
        let mut y = w.clone();
        let mut theta = 1.0f64;
        for iter in 1..=cfg.max_iters {
            let grad = 2.0 * (&self.gram * &y - c);
            let next = project_simplex(&(&y - step * grad));
            // gradient restart test; objective values sit in rounding noise
            // near the optimum and make a poor overshoot signal
            if (&y - &next).dot(&(&next - &w)) > 0.0 {
                y = w.clone();
                theta = 1.0;
                continue;
            }
            let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
            y = &next + ((theta - 1.0) / theta_next) * (&next - &w);
            theta = theta_next;
            w = next;

            if iter % 10 == 0 {
                if let Some(p) = self.polish(&w, c) {
                    if self.gap(&p, c) <= self.gap(&w, c) {
                        w = p;
                        y = w.clone();
                        theta = 1.0;
                    }
                }
                if self.gap(&w, c) <= threshold {
                    return self.finish(w, c, constant, iter, true);
                }
            }
        }
        let converged = self.gap(&w, c) <= threshold;
        self.finish(w, c, constant, cfg.max_iters, converged)
    }

    fn finish(&self, w: DVector<f64>, c: &DVector<f64>, constant: f64, iterations: usize, converged: bool) -> SimplexSolution {
        SimplexSolution {
            objective: self.objective(&w, c, constant),
            gap: self.gap(&w, c),
            weights: w,
            iterations,
            converged,
        }
    }

    /// Minimizer over the affine hull of the current support, kept only if it
    /// stays nonnegative.
    fn polish(&self, w: &DVector<f64>, c: &DVector<f64>) -> Option<DVector<f64>> {
        let support: Vec<usize> = (0..w.len()).filter(|&j| w[j] > 1e-12).collect();
        let s = support.len();
        let mut kkt = DMatrix::zeros(s + 1, s + 1);
        let mut rhs = DVector::zeros(s + 1);
        for (a, &ja) in support.iter().enumerate() {
            for (b, &jb) in support.iter().enumerate() {
                kkt[(a, b)] = 2.0 * self.gram[(ja, jb)];
            }
            kkt[(a, s)] = 1.0;
            kkt[(s, a)] = 1.0;
            rhs[a] = 2.0 * c[ja];
        }
        rhs[s] = 1.0;
        let scale = kkt.amax().max(1.0);
        let sol = kkt.svd(true, true).solve(&rhs, 1e-13 * scale).ok()?;
        let mut out = DVector::zeros(w.len());
        for (a, &j) in support.iter().enumerate() {
            if !(sol[a] >= -1e-14) {
                return None;
            }
            out[j] = sol[a].max(0.0);
        }
        let total = out.sum();
        if !(total > 0.0) {
            return None;
        }
        Some(out / total)
    }
}

/// Euclidean projection onto `{w ≥ 0, Σw = 1}` (sort-and-threshold).
pub fn project_simplex(v: &DVector<f64>) -> DVector<f64> {
    let mut u: Vec<f64> = v.iter().copied().collect();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut shift = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumulative += uj;
        let candidate = (cumulative - 1.0) / (j + 1) as f64;
        if uj - candidate > 0.0 {
            shift = candidate;
        }
    }
    v.map(|x| (x - shift).max(0.0))
}

/// `min ‖b - Aw‖²` over the simplex.
pub fn simplex_least_squares(a: &DMatrix<f64>, b: &DVector<f64>, cfg: &SolverConfig) -> SimplexSolution {
    let qp = SimplexQp::from_design(a);
    qp.solve(&(a.transpose() * b), b.norm_squared(), cfg)
}

/// Donor weight vectors (one per treated unit, or a single shared one) and
/// the additive intercept per treated unit where the method has one.
#[derive(Debug, Clone, PartialEq)]
pub struct ScWeights {
    pub weights: Vec<DVector<f64>>,
    pub intercept: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct ImputationResult {
    pub method: Method,
    /// `counterfactuals` holds the N1 x T1 treated post block.
    pub estimate: AttEstimate,
    pub pre_mspe: f64,
    pub post_mspe: f64,
    /// N1 x T fitted untreated paths for the treated units (rows in
    /// treated-unit order), pre-treatment columns included.
    pub fitted: DMatrix<f64>,
    pub unit_weights: Option<ScWeights>,
    /// SDiD pre-period weights.
    pub time_weights: Option<DVector<f64>>,
    /// GSC factors estimated from the control block.
    pub factor_model: Option<FactorModel>,
    /// GSC treated-unit loadings, N1 x k.
    pub treated_loadings: Option<DMatrix<f64>>,
}

impl ImputationResult {
    pub fn att(&self) -> f64 {
        self.estimate.att
    }
}

/// Mean of `y - ŷ(0)` over treated post cells; `counterfactuals` rows follow
/// [`PanelData::treated_units`].
pub fn impute_att(counterfactuals: &DMatrix<f64>, panel: &PanelData) -> Result<f64> {
    let treated = panel.treated_units();
    if counterfactuals.shape() != (treated.len(), panel.t1()) {
        return Err(Error::DimensionMismatch(format!(
            "counterfactuals are {:?}, treated block is {:?}",
            counterfactuals.shape(),
            (treated.len(), panel.t1())
        )));
    }
    let y = panel.outcomes();
    let t0 = panel.t0();
    let mut sum = 0.0;
    for (r, &i) in treated.iter().enumerate() {
        for c in 0..panel.t1() {
            sum += y[(i, t0 + c)] - counterfactuals[(r, c)];
        }
    }
    Ok(sum / counterfactuals.len() as f64)
}

fn require_donors(panel: &PanelData) -> Result<()> {
    if panel.n0() < 2 || panel.t0() < 2 {
        return Err(Error::UnderIdentified(format!(
            "needs at least 2 controls and 2 pre periods, got N0={} T0={}",
            panel.n0(),
            panel.t0()
        )));
    }
    Ok(())
}

fn finish(
    method: Method,
    panel: &PanelData,
    fitted: DMatrix<f64>,
    mut diagnostics: Vec<(&str, f64)>,
) -> Result<ImputationResult> {
    let treated = panel.treated_units();
    let (t0, t1) = (panel.t0(), panel.t1());
    let y = panel.outcomes();
    let mut pre = 0.0;
    let mut post = 0.0;
    for (r, &i) in treated.iter().enumerate() {
        for s in 0..panel.t() {
            let gap = y[(i, s)] - fitted[(r, s)];
            if s < t0 {
                pre += gap * gap;
            } else {
                post += gap * gap;
            }
        }
    }
    let pre_mspe = pre / (treated.len() * t0) as f64;
    let post_mspe = post / (treated.len() * t1) as f64;
    let counterfactuals = fitted.columns(t0, t1).into_owned();
    let mut estimate = AttEstimate::new(impute_att(&counterfactuals, panel)?);
    estimate.counterfactuals = Some(counterfactuals);
    diagnostics.push(("pre_mspe", pre_mspe));
    diagnostics.push(("post_mspe", post_mspe));
    for (k, v) in diagnostics {
        estimate.diagnostics.insert(k.to_string(), v);
    }
    Ok(ImputationResult {
        method,
        estimate,
        pre_mspe,
        post_mspe,
        fitted,
        unit_weights: None,
        time_weights: None,
        factor_model: None,
        treated_loadings: None,
    })
}

/// Simplex weights of the controls matching each target row over the pre
/// period, on data `y` (already transformed by the caller).
fn donor_weights(
    panel: &PanelData,
    y: &DMatrix<f64>,
    cfg: &ScConfig,
) -> (Vec<DVector<f64>>, f64, bool) {
    let controls = panel.control_units();
    let treated = panel.treated_units();
    let t0 = panel.t0();
    let a = DMatrix::from_fn(t0, controls.len(), |s, j| y[(controls[j], s)]);
    let qp = SimplexQp::from_design(&a);
    let targets: Vec<DVector<f64>> = match cfg.target {
        ScTarget::PerUnit => treated.iter().map(|&i| DVector::from_fn(t0, |s, _| y[(i, s)])).collect(),
        ScTarget::TreatedAverage => vec![DVector::from_fn(t0, |s, _| {
            treated.iter().map(|&i| y[(i, s)]).sum::<f64>() / treated.len() as f64
        })],
    };
    let mut worst_gap = 0.0f64;
    let mut all_converged = true;
    let weights = targets
        .iter()
        .map(|b| {
            let sol = qp.solve(&(a.transpose() * b), b.norm_squared(), &cfg.solver);
            worst_gap = worst_gap.max(sol.gap);
            all_converged &= sol.converged;
            sol.weights
        })
        .collect();
    (weights, worst_gap, all_converged)
}

fn synthetic_paths(panel: &PanelData, y: &DMatrix<f64>, weights: &[DVector<f64>]) -> DMatrix<f64> {
    let controls = panel.control_units();
    let n1 = panel.n1();
    DMatrix::from_fn(n1, panel.t(), |r, s| {
        let w = if weights.len() == 1 { &weights[0] } else { &weights[r] };
        controls.iter().zip(w.iter()).map(|(&j, &wj)| wj * y[(j, s)]).sum()
    })
}

pub fn fit_sc(panel: &PanelData) -> Result<ImputationResult> {
    fit_sc_with(panel, &ScConfig::default())
}

pub fn fit_sc_with(panel: &PanelData, cfg: &ScConfig) -> Result<ImputationResult> {
    require_donors(panel)?;
    let y = panel.outcomes();
    let (weights, gap, converged) = donor_weights(panel, y, cfg);
    let fitted = synthetic_paths(panel, y, &weights);
    let mut out = finish(
        Method::Sc,
        panel,
        fitted,
        vec![("solver_gap", gap), ("converged", f64::from(u8::from(converged)))],
    )?;
    out.unit_weights = Some(ScWeights { weights, intercept: None });
    Ok(out)
}

pub fn fit_dsc(panel: &PanelData) -> Result<ImputationResult> {
    fit_dsc_with(panel, &ScConfig::default())
}

/// SC on outcomes net of each unit's own pre-treatment mean.
pub fn fit_dsc_with(panel: &PanelData, cfg: &ScConfig) -> Result<ImputationResult> {
    require_donors(panel)?;
    let y = panel.outcomes();
    let t0 = panel.t0();
    let level: Vec<f64> = (0..panel.n()).map(|i| y.row(i).columns(0, t0).mean()).collect();
    let demeaned = DMatrix::from_fn(panel.n(), panel.t(), |i, s| y[(i, s)] - level[i]);
    let (weights, gap, converged) = donor_weights(panel, &demeaned, cfg);
    let treated = panel.treated_units();
    let mut fitted = synthetic_paths(panel, &demeaned, &weights);
    let controls = panel.control_units();
    let mut intercept = Vec::with_capacity(treated.len());
    for (r, &i) in treated.iter().enumerate() {
        fitted.row_mut(r).add_scalar_mut(level[i]);
        let w = if weights.len() == 1 { &weights[0] } else { &weights[r] };
        let donor_level: f64 = controls.iter().zip(w.iter()).map(|(&j, &wj)| wj * level[j]).sum();
        intercept.push(level[i] - donor_level);
    }
    let mut out = finish(
        Method::Dsc,
        panel,
        fitted,
        vec![("solver_gap", gap), ("converged", f64::from(u8::from(converged)))],
    )?;
    out.unit_weights = Some(ScWeights {
        weights,
        intercept: Some(intercept),
    });
    Ok(out)
}

/// Factors from the control block, treated loadings from pre-period least
/// squares, counterfactual `λ̂_i'F̂_t`.
pub fn fit_gsc(panel: &PanelData, k: usize) -> Result<ImputationResult> {
    let (n0, t, t0) = (panel.n0(), panel.t(), panel.t0());
    if k > n0.min(t) {
        return Err(Error::TooManyFactors { k, rows: n0, cols: t });
    }
    if t0 <= k {
        return Err(Error::UnderIdentified(format!("T0={t0} pre periods cannot identify {k} loadings")));
    }
    let y = panel.outcomes();
    let controls = panel.control_units();
    let treated = panel.treated_units();
    let block = DMatrix::from_fn(n0, t, |r, s| y[(controls[r], s)]);
    let model = principal_factors(&block, k)?;
    let f = model.factors();
    let f_pre = f.rows(0, t0).into_owned();
    let gram = f_pre.transpose() * &f_pre;
    let chol = gram.cholesky().ok_or(Error::RankDeficient)?;
    let targets = DMatrix::from_fn(t0, treated.len(), |s, r| y[(treated[r], s)]);
    // k x N1
    let lam = chol.solve(&(f_pre.transpose() * targets));
    let fitted = (f * &lam).transpose();
    let mut out = finish(Method::Gsc, panel, fitted, vec![("k", k as f64)])?;
    out.factor_model = Some(model);
    out.treated_loadings = Some(lam.transpose());
    Ok(out)
}

fn sample_sd(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if values.len() < 2 {
        return 0.0;
    }
    let m = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Default unit-weight regularization: `(N1 T1)^{1/4}` times the standard
/// deviation of first-differenced control outcomes over the pre period.
pub fn sdid_default_reg(panel: &PanelData) -> f64 {
    let y = panel.outcomes();
    let mut diffs = Vec::new();
    for j in panel.control_units() {
        for s in 1..panel.t0() {
            diffs.push(y[(j, s)] - y[(j, s - 1)]);
        }
    }
    ((panel.n1() * panel.t1()) as f64).powf(0.25) * sample_sd(&diffs)
}

/// Simplex weights with a free intercept: columns of `a` (the candidates)
/// and `b` are centered over rows, then `min ‖b - Aw‖² + penalty·‖w‖²`.
fn intercept_weights(a: &DMatrix<f64>, b: &DVector<f64>, penalty: f64, cfg: &SolverConfig) -> SimplexSolution {
    let mut ac = a.clone();
    for mut col in ac.column_iter_mut() {
        let m = col.mean();
        col.add_scalar_mut(-m);
    }
    let bc = b.add_scalar(-b.mean());
    let mut gram = ac.transpose() * &ac;
    for j in 0..gram.nrows() {
        gram[(j, j)] += penalty;
    }
    SimplexQp::from_gram(gram).solve(&(ac.transpose() * &bc), bc.norm_squared(), cfg)
}

/// Unit weights `ω` with ridge `reg² T0 ‖ω‖²`, time weights `λ` over the pre
/// period with a negligible ridge, then the doubly weighted difference in
/// differences. `reg = None` uses [`sdid_default_reg`].
pub fn fit_sdid(panel: &PanelData, reg: Option<f64>) -> Result<ImputationResult> {
    fit_sdid_with(panel, reg, &SolverConfig::default())
}

pub fn fit_sdid_with(panel: &PanelData, reg: Option<f64>, solver: &SolverConfig) -> Result<ImputationResult> {
    require_donors(panel)?;
    let zeta = match reg {
        Some(r) if r >= 0.0 && r.is_finite() => r,
        Some(r) => return Err(Error::InvalidArgument(format!("reg must be finite and >= 0, got {r}"))),
        None => sdid_default_reg(panel),
    };
    let y = panel.outcomes();
    let controls = panel.control_units();
    let treated = panel.treated_units();
    let (n0, n1, t0, t1) = (controls.len(), treated.len(), panel.t0(), panel.t1());

    // unit weights: controls' pre paths against the treated-average pre path
    let a = DMatrix::from_fn(t0, n0, |s, j| y[(controls[j], s)]);
    let treated_pre = DVector::from_fn(t0, |s, _| treated.iter().map(|&i| y[(i, s)]).sum::<f64>() / n1 as f64);
    let omega = intercept_weights(&a, &treated_pre, zeta * zeta * t0 as f64, solver);

    // time weights: pre periods against each control's post-period mean
    let mut diffs = Vec::new();
    for &j in &controls {
        for s in 1..t0 {
            diffs.push(y[(j, s)] - y[(j, s - 1)]);
        }
    }
    let zeta_time = 1e-6 * sample_sd(&diffs);
    let b = DMatrix::from_fn(n0, t0, |j, s| y[(controls[j], s)]);
    let control_post = DVector::from_fn(n0, |j, _| {
        (t0..panel.t()).map(|s| y[(controls[j], s)]).sum::<f64>() / t1 as f64
    });
    let lambda = intercept_weights(&b, &control_post, zeta_time * zeta_time * n0 as f64, solver);

    let w = &omega.weights;
    let l = &lambda.weights;
    let synthetic = |s: usize| -> f64 { controls.iter().zip(w.iter()).map(|(&j, &wj)| wj * y[(j, s)]).sum() };
    let synthetic_path: Vec<f64> = (0..panel.t()).map(synthetic).collect();
    let synthetic_pre: f64 = (0..t0).map(|s| l[s] * synthetic_path[s]).sum();
    let mut intercept = Vec::with_capacity(n1);
    let fitted = DMatrix::from_fn(n1, panel.t(), |r, s| {
        let own_pre: f64 = (0..t0).map(|u| l[u] * y[(treated[r], u)]).sum();
        synthetic_path[s] + own_pre - synthetic_pre
    });
    for &i in &treated {
        let own_pre: f64 = (0..t0).map(|u| l[u] * y[(i, u)]).sum();
        intercept.push(own_pre - synthetic_pre);
    }
    let converged = omega.converged && lambda.converged;
    let mut out = finish(
        Method::Sdid,
        panel,
        fitted,
        vec![
            ("zeta", zeta),
            ("solver_gap", omega.gap.max(lambda.gap)),
            ("converged", f64::from(u8::from(converged))),
        ],
    )?;
    out.unit_weights = Some(ScWeights {
        weights: vec![omega.weights],
        intercept: Some(intercept),
    });
    out.time_weights = Some(lambda.weights);
    Ok(out)
}
