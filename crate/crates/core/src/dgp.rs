//! Seeded Monte Carlo designs.
//!
//! Factors, loadings and heterogeneity components are drawn once from the
//! structural seed and held fixed across replications; idiosyncratic noise
//! (and effect and covariate noise) is redrawn per replication. Every draw
//! comes from a keyed stream, so replication `r` is the same no matter which
//! worker generates it or in what order.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Normal, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::PanelData;
use crate::rng::{self, role};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Design {
    /// Constant effect `α = 2`, AR(1) factor with a mean shift at adoption.
    Hom,
    /// `α_{i,t} = 1 + λ_{α,i}'F_{α,t}` with two centered-and-shifted
    /// heterogeneity factors, so the ATT is exactly 2.
    Het,
    /// Time-invariant effects `α_i = Σ_j μ_j b_i^{(j)}` with Bernoulli `b`.
    Inv,
    /// `α_{i,t} = (t - T0) + a_{i,t}` with two factors, additive unit and
    /// period effects and two covariates correlated with the factors.
    Dyn,
    /// Zero effect with exchangeable units (loadings redrawn each
    /// replication); used for size checks of permutation tests.
    Null,
}

impl Design {
    pub fn label(self) -> &'static str {
        match self {
            Design::Hom => "HOM",
            Design::Het => "HET",
            Design::Inv => "INV",
            Design::Dyn => "DYN",
            Design::Null => "NULL",
        }
    }
}

fn default_noise_sd() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub design: Design,
    pub n: usize,
    pub t: usize,
    pub n1: usize,
    pub t0: usize,
    pub k0: usize,
    #[serde(default)]
    pub k_alpha: usize,
    #[serde(default)]
    pub structural_seed: u64,
    #[serde(default)]
    pub noise_seed: u64,
    /// Scale of the idiosyncratic error `e_{i,t}`; 0 gives noiseless panels.
    #[serde(default = "default_noise_sd")]
    pub noise_sd: f64,
}

impl DgpSpec {
    pub fn hom(n: usize, t: usize) -> Self {
        Self {
            design: Design::Hom,
            n,
            t,
            n1: n / 2,
            t0: t / 2,
            k0: 1,
            k_alpha: 0,
            structural_seed: 0,
            noise_seed: 0,
            noise_sd: 1.0,
        }
    }

    pub fn het(n: usize, t: usize) -> Self {
        Self {
            design: Design::Het,
            k_alpha: 2,
            ..Self::hom(n, t)
        }
    }

    pub fn inv(n: usize, t: usize, k_alpha: usize) -> Self {
        Self {
            design: Design::Inv,
            k_alpha,
            ..Self::hom(n, t)
        }
    }

    /// Sizes given as (controls, treated, pre periods, post periods).
    pub fn dyn_design(n0: usize, n1: usize, t0: usize, t1: usize) -> Self {
        Self {
            design: Design::Dyn,
            n: n0 + n1,
            t: t0 + t1,
            n1,
            t0,
            k0: 2,
            k_alpha: 0,
            structural_seed: 0,
            noise_seed: 0,
            noise_sd: 1.0,
        }
    }

    pub fn null(n: usize, t: usize, n1: usize, t0: usize) -> Self {
        Self {
            design: Design::Null,
            n1,
            t0,
            ..Self::hom(n, t)
        }
    }

    pub fn with_seeds(mut self, structural_seed: u64, noise_seed: u64) -> Self {
        self.structural_seed = structural_seed;
        self.noise_seed = noise_seed;
        self
    }

    pub fn t1(&self) -> usize {
        self.t - self.t0
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.n1 == 0 || self.n1 >= self.n {
            return bad(format!("need 1 <= n1 < n, got n1={} n={}", self.n1, self.n));
        }
        if self.t0 == 0 || self.t0 >= self.t {
            return bad(format!("need 1 <= t0 < t, got t0={} t={}", self.t0, self.t));
        }
        if self.k0 == 0 {
            return bad("k0 must be >= 1".into());
        }
        if !(self.noise_sd >= 0.0) {
            return bad("noise_sd must be >= 0".into());
        }
        match self.design {
            Design::Het if self.k_alpha != 2 => bad("HET uses k_alpha = 2".into()),
            Design::Inv if !(1..=3).contains(&self.k_alpha) => bad("INV needs k_alpha in 1..=3".into()),
            _ => Ok(()),
        }
    }

    /// Nominal dimension of the extended factor structure: untreated factors
    /// stacked with treatment-interacted heterogeneity factors. For INV the
    /// heterogeneity factors are all constant, so the actual rank is `k0 + 1`.
    pub fn extended_factor_count(&self) -> usize {
        match self.design {
            Design::Het | Design::Inv => self.k0 + self.k_alpha,
            _ => self.k0,
        }
    }
}

/// Draws held fixed across replications.
#[derive(Debug, Clone, PartialEq)]
pub struct Structure {
    /// T x k0.
    pub po_factors: DMatrix<f64>,
    /// N x k0. Empty for [`Design::Null`], whose loadings are per replication.
    pub po_loadings: DMatrix<f64>,
    /// N1 x k_alpha (HET, INV).
    pub het_loadings: Option<DMatrix<f64>>,
    /// T1 x k_alpha (HET).
    pub het_factors: Option<DMatrix<f64>>,
    /// Length N (DYN).
    pub unit_effects: Option<DVector<f64>>,
    /// Length T (DYN).
    pub time_effects: Option<DVector<f64>>,
}

#[derive(Debug, Clone)]
pub struct GeneratedPanel {
    pub panel: PanelData,
    /// Mean of `α_{i,t}` over treated cells of this replication.
    pub true_att: f64,
    /// Deterministic part of the per-period effect, when the design has one.
    pub true_per_period: Option<Vec<f64>>,
    /// Untreated potential outcomes for every cell.
    pub oracle_y0: DMatrix<f64>,
    /// `α_{i,t}` on treated cells, zero elsewhere.
    pub effects: DMatrix<f64>,
}

const MU: [f64; 3] = [0.5, 1.0, -0.5];

/// Mean-shifting AR(1) factor: `F_t = -2 + ρ_t F_{t-1} + e_t` with
/// `ρ_t = 0.25 + 0.5·1(t > T0)` and `e_t ~ N(0, 1 - ρ_t²)`. The first value is
/// drawn from the pre-period stationary law `N(-2/(1 - 0.25), 1)`.
/// Returns the series and the standardized shocks that drove it.
pub fn ar_factor(t: usize, t0: usize, r: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let z: Vec<f64> = (0..t).map(|_| r.sample(StandardNormal)).collect();
    (ar_recursion(&z, t0), z)
}

/// The deterministic map from standardized shocks to the AR factor path.
pub fn ar_recursion(z: &[f64], t0: usize) -> Vec<f64> {
    let rho = |s: usize| if s >= t0 { 0.75 } else { 0.25 };
    let mut f = Vec::with_capacity(z.len());
    for (s, &zs) in z.iter().enumerate() {
        let value = if s == 0 {
            -2.0 / (1.0 - rho(0)) + zs
        } else {
            let p = rho(s);
            -2.0 + p * f[s - 1] + (1.0 - p * p).sqrt() * zs
        };
        f.push(value);
    }
    f
}

fn uniform(r: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    Uniform::new(lo, hi).expect("lo < hi").sample(r)
}

fn structural_stream(spec: &DgpSpec, role: u64) -> ChaCha8Rng {
    rng::stream(&[spec.structural_seed, role])
}

fn noise_stream(spec: &DgpSpec, rep: u64, role: u64) -> ChaCha8Rng {
    rng::stream(&[spec.structural_seed, spec.noise_seed, rep, role])
}

fn ar_factors(spec: &DgpSpec) -> DMatrix<f64> {
    let mut r = structural_stream(spec, role::PO_FACTOR);
    let mut f = DMatrix::zeros(spec.t, spec.k0);
    for j in 0..spec.k0 {
        let (series, _) = ar_factor(spec.t, spec.t0, &mut r);
        f.set_column(j, &DVector::from_vec(series));
    }
    f
}

/// Controls from `U(-√3, √3)`, treated from `U(-√(3/4), √3)`.
fn shifted_loadings(spec: &DgpSpec, r: &mut ChaCha8Rng) -> DMatrix<f64> {
    let s3 = 3f64.sqrt();
    let lo_treated = 0.75f64.sqrt();
    DMatrix::from_fn(spec.n, spec.k0, |i, _| {
        if i < spec.n1 {
            uniform(r, -lo_treated, s3)
        } else {
            uniform(r, -s3, s3)
        }
    })
}

fn symmetric_loadings(rows: usize, cols: usize, r: &mut ChaCha8Rng) -> DMatrix<f64> {
    let s3 = 3f64.sqrt();
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = uniform(r, -s3, s3);
        }
    }
    m
}

/// Subtracts column means and adds `shift`.
fn center_and_shift(m: DMatrix<f64>, shift: &[f64]) -> DMatrix<f64> {
    let mut out = m;
    for (j, mut col) in out.column_iter_mut().enumerate() {
        let mean = col.mean();
        col.apply(|v| *v = *v - mean + shift[j]);
    }
    out
}

/// The replication-invariant part of a design.
pub fn structure(spec: &DgpSpec) -> Result<Structure> {
    spec.validate()?;
    let s = match spec.design {
        Design::Hom => Structure {
            po_factors: ar_factors(spec),
            po_loadings: shifted_loadings(spec, &mut structural_stream(spec, role::PO_LOADING)),
            het_loadings: None,
            het_factors: None,
            unit_effects: None,
            time_effects: None,
        },
        Design::Het => {
            let mut rl = structural_stream(spec, role::HET_LOADING);
            let mut rf = structural_stream(spec, role::HET_FACTOR);
            let delta = DMatrix::from_fn(spec.n1, 2, |_, _| rl.sample::<f64, _>(StandardNormal));
            let f = DMatrix::from_fn(spec.t1(), 2, |_, _| rf.sample::<f64, _>(StandardNormal));
            Structure {
                het_loadings: Some(center_and_shift(delta, &[-1.0, 1.0])),
                het_factors: Some(center_and_shift(f, &[1.0, 2.0])),
                ..structure(&DgpSpec {
                    design: Design::Hom,
                    ..spec.clone()
                })?
            }
        }
        Design::Inv => {
            let mut rb = structural_stream(spec, role::INV_BERNOULLI);
            let coin = Bernoulli::new(0.5).expect("valid probability");
            let b = DMatrix::from_fn(spec.n1, spec.k_alpha, |_, j| {
                if coin.sample(&mut rb) {
                    MU[j]
                } else {
                    0.0
                }
            });
            Structure {
                het_loadings: Some(b),
                ..structure(&DgpSpec {
                    design: Design::Hom,
                    ..spec.clone()
                })?
            }
        }
        Design::Dyn => {
            let mut rf = structural_stream(spec, role::PO_FACTOR);
            let mut rl = structural_stream(spec, role::PO_LOADING);
            let mut rz = structural_stream(spec, role::TIME_EFFECT);
            let mut ru = structural_stream(spec, role::UNIT_EFFECT);
            let s3 = 3f64.sqrt();
            Structure {
                po_factors: DMatrix::from_fn(spec.t, spec.k0, |_, _| rf.sample::<f64, _>(StandardNormal)),
                po_loadings: symmetric_loadings(spec.n, spec.k0, &mut rl),
                het_loadings: None,
                het_factors: None,
                unit_effects: Some(DVector::from_fn(spec.n, |_, _| uniform(&mut ru, -s3, s3))),
                time_effects: Some(DVector::from_fn(spec.t, |_, _| rz.sample::<f64, _>(StandardNormal))),
            }
        }
        Design::Null => Structure {
            po_factors: ar_factors(spec),
            po_loadings: DMatrix::zeros(spec.n, 0),
            het_loadings: None,
            het_factors: None,
            unit_effects: None,
            time_effects: None,
        },
    };
    Ok(s)
}

fn idiosyncratic(spec: &DgpSpec, rep: u64) -> DMatrix<f64> {
    let mut r = noise_stream(spec, rep, role::IDIOSYNCRATIC);
    let sd = spec.noise_sd;
    DMatrix::from_fn(spec.n, spec.t, |_, _| sd * r.sample::<f64, _>(StandardNormal))
}

fn assemble(
    spec: &DgpSpec,
    y0: DMatrix<f64>,
    effects: DMatrix<f64>,
    covariates: Vec<DMatrix<f64>>,
    true_per_period: Option<Vec<f64>>,
) -> Result<GeneratedPanel> {
    let treated: Vec<usize> = (0..spec.n1).collect();
    let y = &y0 + &effects;
    let mut sum = 0.0;
    for i in 0..spec.n1 {
        for s in spec.t0..spec.t {
            sum += effects[(i, s)];
        }
    }
    let true_att = sum / (spec.n1 * spec.t1()) as f64;
    let panel = PanelData::new(y, &treated, spec.t0)?.with_covariates(covariates)?;
    Ok(GeneratedPanel {
        panel,
        true_att,
        true_per_period,
        oracle_y0: y0,
        effects,
    })
}

fn effects_from(spec: &DgpSpec, alpha: impl Fn(usize, usize) -> f64) -> DMatrix<f64> {
    DMatrix::from_fn(spec.n, spec.t, |i, s| {
        if i < spec.n1 && s >= spec.t0 {
            alpha(i, s)
        } else {
            0.0
        }
    })
}

fn check_design(spec: &DgpSpec, want: Design) -> Result<()> {
    if spec.design != want {
        return Err(Error::InvalidArgument(format!(
            "spec is {}, generator expects {}",
            spec.design.label(),
            want.label()
        )));
    }
    spec.validate()
}

/// Homogeneous effect `α_{i,t} = 2`.
pub fn gen_hom(spec: &DgpSpec, rep: u64) -> Result<GeneratedPanel> {
    check_design(spec, Design::Hom)?;
    let s = structure(spec)?;
    let y0 = &s.po_loadings * s.po_factors.transpose() + idiosyncratic(spec, rep);
    assemble(spec, y0, effects_from(spec, |_, _| 2.0), Vec::new(), None)
}

/// Heterogeneous effect `α_{i,t} = 1 + λ_{α,i}'F_{α,t}`.
pub fn gen_het(spec: &DgpSpec, rep: u64) -> Result<GeneratedPanel> {
    check_design(spec, Design::Het)?;
    let s = structure(spec)?;
    let y0 = &s.po_loadings * s.po_factors.transpose() + idiosyncratic(spec, rep);
    let lam = s.het_loadings.as_ref().expect("HET structure");
    let f = s.het_factors.as_ref().expect("HET structure");
    let t0 = spec.t0;
    let effects = effects_from(spec, |i, t| 1.0 + lam.row(i).dot(&f.row(t - t0)));
    assemble(spec, y0, effects, Vec::new(), None)
}

/// Time-invariant effect `α_i = Σ_j μ_j b_i^{(j)}`, `μ = (1/2, 1, -1/2)`.
pub fn gen_inv(spec: &DgpSpec, rep: u64) -> Result<GeneratedPanel> {
    check_design(spec, Design::Inv)?;
    let s = structure(spec)?;
    let y0 = &s.po_loadings * s.po_factors.transpose() + idiosyncratic(spec, rep);
    let b = s.het_loadings.as_ref().expect("INV structure");
    let alpha: Vec<f64> = (0..spec.n1).map(|i| b.row(i).sum()).collect();
    let effects = effects_from(spec, |i, _| alpha[i]);
    assemble(spec, y0, effects, Vec::new(), None)
}

/// `y = α d + 5 + λ'F + ζ_t + μ_i + x1 + 3 x2 + e` with
/// `x_j = 1 + λ'F + λ'1 + F'1 + η_j` and `α_{i,t} = (t - T0) + a_{i,t}`,
/// `a ~ N(0, 5)` (variance 5).
pub fn gen_dyn(spec: &DgpSpec, rep: u64) -> Result<GeneratedPanel> {
    check_design(spec, Design::Dyn)?;
    let s = structure(spec)?;
    let (n, t) = (spec.n, spec.t);
    let common = &s.po_loadings * s.po_factors.transpose();
    let lam_sum: Vec<f64> = (0..n).map(|i| s.po_loadings.row(i).sum()).collect();
    let f_sum: Vec<f64> = (0..t).map(|u| s.po_factors.row(u).sum()).collect();
    let mut re = noise_stream(spec, rep, role::COVARIATE_NOISE);
    let mut covariates = Vec::with_capacity(2);
    for _ in 0..2 {
        covariates.push(DMatrix::from_fn(n, t, |i, u| {
            1.0 + common[(i, u)] + lam_sum[i] + f_sum[u] + re.sample::<f64, _>(StandardNormal)
        }));
    }
    let mu = s.unit_effects.as_ref().expect("DYN structure");
    let zeta = s.time_effects.as_ref().expect("DYN structure");
    let e = idiosyncratic(spec, rep);
    let y0 = DMatrix::from_fn(n, t, |i, u| {
        5.0 + common[(i, u)] + zeta[u] + mu[i] + covariates[0][(i, u)] + 3.0 * covariates[1][(i, u)] + e[(i, u)]
    });
    let mut ra = noise_stream(spec, rep, role::EFFECT_NOISE);
    let a = Normal::new(0.0, 5f64.sqrt()).expect("valid sd");
    let t0 = spec.t0;
    // Draw a for every cell so the stream layout does not depend on n1.
    let noise = DMatrix::from_fn(n, t, |_, _| a.sample(&mut ra));
    let effects = effects_from(spec, |i, u| (u + 1 - t0) as f64 + noise[(i, u)]);
    let psi = (1..=spec.t1()).map(|v| v as f64).collect();
    assemble(spec, y0, effects, covariates, Some(psi))
}

/// Zero effect; every unit's loading is `U(-√3, √3)`, redrawn each
/// replication.
pub fn gen_null(spec: &DgpSpec, rep: u64) -> Result<GeneratedPanel> {
    check_design(spec, Design::Null)?;
    let s = structure(spec)?;
    let mut rl = noise_stream(spec, rep, role::PO_LOADING);
    let lam = symmetric_loadings(spec.n, spec.k0, &mut rl);
    let y0 = &lam * s.po_factors.transpose() + idiosyncratic(spec, rep);
    assemble(spec, y0, DMatrix::zeros(spec.n, spec.t), Vec::new(), None)
}

/// Dispatches on `spec.design`. Replications are numbered from 1.
pub fn generate(spec: &DgpSpec, rep: u64) -> Result<GeneratedPanel> {
    match spec.design {
        Design::Hom => gen_hom(spec, rep),
        Design::Het => gen_het(spec, rep),
        Design::Inv => gen_inv(spec, rep),
        Design::Dyn => gen_dyn(spec, rep),
        Design::Null => gen_null(spec, rep),
    }
}
