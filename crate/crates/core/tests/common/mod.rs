#![allow(dead_code)]

use ifelab_core::PanelData;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| r.sample::<f64, _>(StandardNormal))
}

/// `Y = 2D + ΛF' + e` with the first `n1` units treated after `t0`.
pub fn factor_panel(r: &mut ChaCha8Rng, n: usize, t: usize, n1: usize, t0: usize, k: usize, noise: f64) -> PanelData {
    let lam = normal_matrix(r, n, k);
    let f = normal_matrix(r, t, k);
    let e = normal_matrix(r, n, t) * noise;
    let mut y = lam * f.transpose() + e;
    for i in 0..n1 {
        for s in t0..t {
            y[(i, s)] += 2.0;
        }
    }
    PanelData::new(y, &(0..n1).collect::<Vec<_>>(), t0).unwrap()
}

/// Random panel size with `n1`, `t0` leaving at least two donors and two
/// pre-periods.
pub fn random_shape(r: &mut ChaCha8Rng, lo: usize, hi: usize) -> (usize, usize, usize, usize) {
    let n = r.random_range(lo..=hi);
    let t = r.random_range(lo..=hi);
    let n1 = r.random_range(1..=n - 3);
    let t0 = r.random_range(2..=t - 1);
    (n, t, n1, t0)
}

pub fn indicator(panel: &PanelData) -> DMatrix<f64> {
    DMatrix::from_fn(panel.n(), panel.t(), |i, s| if panel.is_treated_cell(i, s) { 1.0 } else { 0.0 })
}

/// `I - F(F'F)^{-1}F'` by explicit inverse.
pub fn explicit_annihilator(f: &DMatrix<f64>) -> DMatrix<f64> {
    let t = f.nrows();
    if f.ncols() == 0 {
        return DMatrix::identity(t, t);
    }
    let inv = (f.transpose() * f).try_inverse().unwrap();
    DMatrix::identity(t, t) - f * inv * f.transpose()
}

/// `min_F SSE(α, F)` over rank-k factor spaces: the residual energy left
/// after the top k eigenvalues of `R'R`, `R = Y - αD`.
pub fn concentrated_sse(y: &DMatrix<f64>, d: &DMatrix<f64>, alpha: f64, k: usize) -> f64 {
    let r = y - d * alpha;
    let mut eig: Vec<f64> = (r.transpose() * &r).symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    eig[k..].iter().sum::<f64>().max(0.0)
}

pub fn grid_argmin(y: &DMatrix<f64>, d: &DMatrix<f64>, k: usize) -> f64 {
    let coarse = 0.01;
    let mut best = (f64::INFINITY, 0.0);
    for j in -2000..=2000 {
        let a = j as f64 * coarse;
        let v = concentrated_sse(y, d, a, k);
        if v < best.0 {
            best = (v, a);
        }
    }
    let centre = best.1;
    for j in -300..=300 {
        let a = centre + j as f64 * 1e-4;
        let v = concentrated_sse(y, d, a, k);
        if v < best.0 {
            best = (v, a);
        }
    }
    best.1
}

pub fn naive_d(f: &DMatrix<f64>, panel: &PanelData, lam: &DMatrix<f64>) -> f64 {
    let (n, t) = (panel.n(), panel.t());
    let m = explicit_annihilator(f);
    let d = indicator(panel);
    let gram_inv = (lam.transpose() * lam / n as f64).try_inverse().unwrap();
    let rows: Vec<DVector<f64>> = (0..n).map(|i| d.row(i).transpose()).collect();
    let mut first = 0.0;
    for di in &rows {
        first += (di.transpose() * &m * di)[(0, 0)];
    }
    let mut second = 0.0;
    for i in 0..n {
        for j in 0..n {
            let q = (rows[i].transpose() * &m * &rows[j])[(0, 0)];
            let w = (lam.row(i) * &gram_inv * lam.row(j).transpose())[(0, 0)];
            second += q * w;
        }
    }
    first / (n * t) as f64 - second / (n * n * t) as f64
}

pub fn simplex_grid_min(a: &DMatrix<f64>, b: &DVector<f64>) -> f64 {
    let steps = 200;
    let mut best = f64::INFINITY;
    for i in 0..=steps {
        for j in 0..=steps - i {
            let w = DVector::from_vec(vec![
                i as f64 / steps as f64,
                j as f64 / steps as f64,
                (steps - i - j) as f64 / steps as f64,
            ]);
            best = best.min((b - a * w).norm_squared());
        }
    }
    best
}

pub fn loop_sse(panel: &PanelData, alpha: f64, f: &DMatrix<f64>) -> f64 {
    let m = explicit_annihilator(f);
    let (n, t) = (panel.n(), panel.t());
    let y = panel.outcomes();
    let mut total = 0.0;
    for i in 0..n {
        let u: Vec<f64> = (0..t)
            .map(|s| y[(i, s)] - if panel.is_treated_cell(i, s) { alpha } else { 0.0 })
            .collect();
        for a in 0..t {
            for b in 0..t {
                total += u[a] * m[(a, b)] * u[b];
            }
        }
    }
    total
}
