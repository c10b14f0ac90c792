//! Principal-components factor extraction, annihilator projections and the
//! treatment/factor non-collinearity functional.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::panel::PanelData;

/// Above this size the smaller Gram matrix is no longer formed and
/// decomposed densely; a block subspace iteration is used instead.
pub const DENSE_GRAM_LIMIT: usize = 200;

/// Factors `F` (T x k) and loadings `Λ` (N x k) with `F'F/T = I_k` and
/// `Λ'Λ` diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    factors: DMatrix<f64>,
    loadings: DMatrix<f64>,
}

impl FactorModel {
    pub fn new(factors: DMatrix<f64>, loadings: DMatrix<f64>) -> Result<Self> {
        if factors.ncols() != loadings.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "factors have {} columns, loadings {}",
                factors.ncols(),
                loadings.ncols()
            )));
        }
        Ok(Self { factors, loadings })
    }

    pub fn empty(n: usize, t: usize) -> Self {
        Self {
            factors: DMatrix::zeros(t, 0),
            loadings: DMatrix::zeros(n, 0),
        }
    }

    pub fn k(&self) -> usize {
        self.factors.ncols()
    }

    pub fn factors(&self) -> &DMatrix<f64> {
        &self.factors
    }

    pub fn loadings(&self) -> &DMatrix<f64> {
        &self.loadings
    }

    /// `Λ F'`, the N x T common component.
    pub fn common_component(&self) -> DMatrix<f64> {
        &self.loadings * self.factors.transpose()
    }
}

/// Orthonormal basis `Q` of a factor space, so that `M_F = I - QQ'`.
#[derive(Debug, Clone)]
pub(crate) struct FactorBasis {
    q: DMatrix<f64>,
}

impl FactorBasis {
    pub(crate) fn from_factors(f: &DMatrix<f64>) -> Result<Self> {
        let (t, k) = f.shape();
        if k == 0 {
            return Ok(Self { q: DMatrix::zeros(t, 0) });
        }
        if k > t {
            return Err(Error::RankDeficient);
        }
        let qr = f.clone().qr();
        let r = qr.r();
        let scale = f.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
        if scale == 0.0 || (0..k).any(|j| r[(j, j)].abs() <= 1e-10 * scale) {
            return Err(Error::RankDeficient);
        }
        Ok(Self { q: qr.q() })
    }

    /// For factors already normalized to `F'F/T = I`.
    pub(crate) fn from_normalized(f: &DMatrix<f64>) -> Self {
        let t = f.nrows() as f64;
        Self { q: f / t.sqrt() }
    }

    pub(crate) fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    /// `M_F v`.
    pub(crate) fn annihilate(&self, v: &DVector<f64>) -> DVector<f64> {
        if self.q.ncols() == 0 {
            return v.clone();
        }
        v - &self.q * (self.q.transpose() * v)
    }
}

/// `M_F = I - F(F'F)^{-1}F'`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    annihilator: DMatrix<f64>,
}

impl Projection {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.annihilator
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.annihilator * v
    }
}

pub fn annihilator(f: &DMatrix<f64>) -> Result<Projection> {
    let basis = FactorBasis::from_factors(f)?;
    let t = f.nrows();
    let q = basis.q();
    Ok(Projection {
        annihilator: DMatrix::identity(t, t) - q * q.transpose(),
    })
}

/// Frobenius distance between the orthogonal projections onto two factor
/// spaces. Factors are identified only up to rotation, so this is the
/// comparison to use between estimated and true factors.
pub fn projection_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    let qa = FactorBasis::from_factors(a)?;
    let qb = FactorBasis::from_factors(b)?;
    let pa = qa.q() * qa.q().transpose();
    let pb = qb.q() * qb.q().transpose();
    Ok((pa - pb).norm())
}

/// Rank-k principal components of an N x T matrix.
///
/// `F` is √T times the leading eigenvectors of `Y'Y`, `Λ = Y F / T`. The
/// result minimizes `Σ_i ||Y_i - F λ_i||²` over rank-k factor models.
pub fn principal_factors(data: &DMatrix<f64>, k: usize) -> Result<FactorModel> {
    principal_factors_hinted(data, k, None).map(|(m, _)| m)
}

/// As [`principal_factors`], also returning the sum of the retained
/// eigenvalues of `Y'Y` (the explained sum of squares). `hint` seeds the
/// iterative solver on large inputs and is ignored on the dense path.
pub(crate) fn principal_factors_hinted(
    data: &DMatrix<f64>,
    k: usize,
    hint: Option<&DMatrix<f64>>,
) -> Result<(FactorModel, f64)> {
    let (n, t) = data.shape();
    if k > n.min(t) {
        return Err(Error::TooManyFactors { k, rows: n, cols: t });
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    if k == 0 {
        return Ok((FactorModel::empty(n, t), 0.0));
    }
    let (mut v, explained) = if n.min(t) <= DENSE_GRAM_LIMIT {
        dense_right_vectors(data, k)
    } else {
        match subspace_right_vectors(data, k, hint) {
            Some(found) => found,
            None => dense_right_vectors(data, k),
        }
    };
    fix_signs(&mut v);
    let factors = v * (t as f64).sqrt();
    let loadings = data * &factors / t as f64;
    Ok((FactorModel { factors, loadings }, explained))
}

/// Leading k right singular vectors (T x k, orthonormal) and the sum of
/// their squared singular values, from the smaller Gram matrix.
fn dense_right_vectors(data: &DMatrix<f64>, k: usize) -> (DMatrix<f64>, f64) {
    let (n, t) = data.shape();
    if t <= n {
        let gram = data.tr_mul(data);
        let (vals, vecs) = sorted_eigen(gram);
        let v = vecs.columns(0, k).into_owned();
        (v, vals.iter().take(k).map(|x| x.max(0.0)).sum())
    } else {
        let gram = data * data.transpose();
        let (vals, vecs) = sorted_eigen(gram);
        let top = vals[0].max(0.0);
        let mut v = DMatrix::zeros(t, k);
        let mut filled = 0;
        for j in 0..k {
            if vals[j] <= 1e-12 * top || vals[j] <= 0.0 {
                break;
            }
            let col = data.tr_mul(&vecs.column(j).into_owned()) / vals[j].sqrt();
            v.set_column(j, &col);
            filled += 1;
        }
        complete_orthonormal(&mut v, filled);
        (v, vals.iter().take(k).map(|x| x.max(0.0)).sum())
    }
}

/// Eigenvalues in descending order with matching eigenvector columns.
fn sorted_eigen(sym: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = order.iter().map(|&j| eig.eigenvalues[j]).collect();
    let vecs = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (vals, vecs)
}

/// Fills columns `filled..` of `v` with unit vectors orthogonal to all
/// previous columns (Gram-Schmidt against the standard basis).
fn complete_orthonormal(v: &mut DMatrix<f64>, filled: usize) {
    let (t, k) = v.shape();
    let mut j = filled;
    let mut e = 0;
    while j < k && e < t {
        let mut cand = DVector::zeros(t);
        cand[e] = 1.0;
        for _ in 0..2 {
            for c in 0..j {
                let col = v.column(c).into_owned();
                let dot = col.dot(&cand);
                cand -= col * dot;
            }
        }
        let norm = cand.norm();
        if norm > 1e-8 {
            v.set_column(j, &(cand / norm));
            j += 1;
        }
        e += 1;
    }
}

/// Block subspace iteration with Rayleigh-Ritz on `Y'Y`, never forming the
/// Gram matrix. Returns `None` if it fails to converge.
fn subspace_right_vectors(
    data: &DMatrix<f64>,
    k: usize,
    hint: Option<&DMatrix<f64>>,
) -> Option<(DMatrix<f64>, f64)> {
    let t = data.ncols();
    let block = (k + 8).min(t);
    let mut v = DMatrix::zeros(t, block);
    let mut start = 0;
    if let Some(h) = hint {
        if h.nrows() == t {
            let cols = h.ncols().min(block);
            v.columns_mut(0, cols).copy_from(&h.columns(0, cols));
            start = cols;
        }
    }
    // Deterministic fill for the remaining columns.
    for c in start..block {
        for r in 0..t {
            let x = ((r * 7919 + c * 104_729 + 13) % 1_000_003) as f64;
            v[(r, c)] = (x * 0.618_033_988_749_895).fract() - 0.5;
        }
    }
    v = v.qr().q();

    let mut prev: Option<Vec<f64>> = None;
    for _ in 0..1000 {
        let yv = data * &v;
        let z = data.tr_mul(&yv);
        let q = z.qr().q();
        let yq = data * &q;
        let small = yq.tr_mul(&yq);
        let (vals, vecs) = sorted_eigen(small);
        v = &q * vecs;
        let top: Vec<f64> = vals.iter().take(k).copied().collect();
        if let Some(p) = &prev {
            let scale = top[0].abs().max(1e-300);
            let stalled = top.iter().zip(p).all(|(a, b)| (a - b).abs() <= 1e-14 * scale);
            if stalled {
                let lead = v.columns(0, k).into_owned();
                let resid = data.tr_mul(&(data * &lead)) - &lead * DMatrix::from_diagonal(&DVector::from_vec(top.clone()));
                if resid.column_iter().all(|c| c.norm() <= 1e-9 * scale) {
                    return Some((lead, top.iter().map(|x| x.max(0.0)).sum()));
                }
            }
        }
        prev = Some(top);
    }
    None
}

/// Makes the largest-magnitude entry of each column positive.
fn fix_signs(v: &mut DMatrix<f64>) {
    for mut col in v.column_iter_mut() {
        let mut best = 0.0f64;
        for &x in col.iter() {
            if x.abs() > best.abs() {
                best = x;
            }
        }
        if best < 0.0 {
            col.neg_mut();
        }
    }
}

/// Non-collinearity of the treatment dummy with the factor space:
///
/// `D(F) = (1/NT) Σ_i D_i'M_F D_i - (1/N²T) Σ_i Σ_j D_i'M_F D_j λ_i'(Λ'Λ/N)^{-1} λ_j`.
///
/// With block treatment `D_i = d_i · d_T`, every quadratic form equals
/// `d_i d_j · c` where `c = d_T' M_F d_T`, so the double sum collapses to
/// `c · s'(Λ'Λ/N)^{-1}s / (N²T)` with `s = Σ_{i treated} λ_i`.
pub fn d_functional(f: &DMatrix<f64>, panel: &PanelData, loadings: &DMatrix<f64>) -> Result<f64> {
    let (n, t) = (panel.n(), panel.t());
    if f.nrows() != t || loadings.nrows() != n || f.ncols() != loadings.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "F is {:?}, loadings {:?}, panel {n}x{t}",
            f.shape(),
            loadings.shape()
        )));
    }
    let basis = FactorBasis::from_factors(f)?;
    let dt = panel.period_indicator();
    let c = dt.dot(&basis.annihilate(&dt));
    let n1 = panel.n1() as f64;
    let (nf, tf) = (n as f64, t as f64);
    if f.ncols() == 0 {
        return Ok(c * n1 / (nf * tf));
    }
    let s = loadings.tr_mul(&panel.unit_indicator());
    let gram = loadings.tr_mul(loadings) / nf;
    let chol = gram.cholesky().ok_or(Error::SingularLoadings)?;
    let quad = s.dot(&chol.solve(&s));
    Ok(c / (nf * tf) * (n1 - quad / nf))
}
