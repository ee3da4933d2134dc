//! Truncated Fourier-space operators: `Δ_k`, `h`, `q`, `H_k`, `R_{BC}`, their
//! norms, and the certified dense inverse of `R_{G'G'}`.
//!
//! In the plane-wave basis `e^{ib·x}` the matrix elements are
//! `(Δ_k)_{bc} = N_b(k) δ_{bc}`, `h_{bc} = −2(c+k)·Â(b−c)`, `q_{bc} = q̂(b−c)`,
//! and `R_{bc} = δ_{bc} + w_{bc}/N_c` with `w = h + q`.

use nalgebra::DMatrix;
use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{rdot, CVec2, Model, ZERO};
use crate::freecurve::{n_full_at, KPoint};
use crate::lattice::{DualPoint, Lattice};

pub type CMat = DMatrix<C>;

/// Denominators below this modulus are treated as singular.
pub const SINGULAR_DENOMINATOR: f64 = 1e-12;

/// The bound `17/18` below which the Neumann series for `R_{G'G'}` is certified.
pub const NEUMANN_LIMIT: f64 = 17.0 / 18.0;

/// A finite set of dual points split into the singular set `G` and `G'`.
#[derive(Clone, Debug, PartialEq)]
pub struct IndexWindow {
    pub all_points: Vec<DualPoint>,
    pub g_set: Vec<DualPoint>,
    pub gprime: Vec<DualPoint>,
    /// Radius of the balls whose union is the window.
    pub radius: f64,
}

impl IndexWindow {
    /// The union of the closed balls of the given radius about every point
    /// of `g` (about 0 when `g` is empty); `g` itself is always included.
    ///
    /// Using balls about each element of `G` keeps the window invariant
    /// under the translations that relate the two descriptions of a handle.
    pub fn around(lat: &Lattice, g: &[DualPoint], radius: f64) -> Self {
        let centres: Vec<DualPoint> = if g.is_empty() { vec![DualPoint::ZERO] } else { g.to_vec() };
        let mut all: Vec<DualPoint> = centres.iter().flat_map(|d| lat.enumerate_ball(lat.point(*d), radius)).collect();
        all.extend_from_slice(g);
        all.sort();
        all.dedup();
        Self::split(all, g, radius)
    }

    /// The ball `|b| ≤ radius` with the given singular set.
    pub fn ball(lat: &Lattice, radius: f64, g: &[DualPoint]) -> Self {
        let mut all = lat.enumerate_dual(radius);
        all.extend_from_slice(g);
        all.sort();
        all.dedup();
        Self::split(all, g, radius)
    }

    fn split(all: Vec<DualPoint>, g: &[DualPoint], radius: f64) -> Self {
        let gprime = all.iter().copied().filter(|b| !g.contains(b)).collect();
        IndexWindow { all_points: all, g_set: g.to_vec(), gprime, radius }
    }

    /// Checks `|N_b(k)| ≥ ε|v|` on `G'`, the standing hypothesis of the reduction.
    pub fn bind(&self, lat: &Lattice, k: &KPoint, epsilon: f64) -> Result<()> {
        let floor = epsilon * k.v_norm();
        for &b in &self.gprime {
            let n = n_full_at(lat.point(b), k).norm();
            if n < floor {
                return Err(Error::RegionViolation(format!(
                    "b = {b} in G' has |N_b(k)| = {n:.4e} < eps|v| = {floor:.4e}"
                )));
            }
        }
        Ok(())
    }

    pub fn translate(&self, d: DualPoint) -> Self {
        let all = self.all_points.iter().map(|b| *b + d).collect();
        let g: Vec<DualPoint> = self.g_set.iter().map(|b| *b + d).collect();
        Self::split(all, &g, self.radius)
    }
}

/// A dense matrix with its row and column index points.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedOperator {
    pub rows: Vec<DualPoint>,
    pub cols: Vec<DualPoint>,
    pub entries: CMat,
}

impl TruncatedOperator {
    pub fn new(rows: Vec<DualPoint>, cols: Vec<DualPoint>, entries: CMat) -> Self {
        debug_assert_eq!(entries.shape(), (rows.len(), cols.len()));
        TruncatedOperator { rows, cols, entries }
    }

    pub fn schur_norm(&self) -> f64 {
        schur_norm(&self.entries)
    }

    pub fn sigma_norm(&self, lat: &Lattice, beta: f64) -> f64 {
        sigma_norm(lat, &self.rows, &self.cols, &self.entries, beta)
    }

    pub fn sigma_min(&self) -> f64 {
        sigma_min(&self.entries)
    }

    /// Row-major `(b_row, b_col, re, im)` records of the nonzero entries.
    pub fn dump(&self) -> Vec<(DualPoint, DualPoint, f64, f64)> {
        let mut out = Vec::new();
        for (i, b) in self.rows.iter().enumerate() {
            for (j, c) in self.cols.iter().enumerate() {
                let x = self.entries[(i, j)];
                if x != ZERO {
                    out.push((*b, *c, x.re, x.im));
                }
            }
        }
        out
    }
}

/// `max(sup_c Σ_b |T_bc|, sup_b Σ_c |T_bc|)`, an upper bound on `‖T‖`.
pub fn schur_norm(m: &CMat) -> f64 {
    let (r, c) = m.shape();
    let mut col_max: f64 = 0.0;
    for j in 0..c {
        col_max = col_max.max((0..r).map(|i| m[(i, j)].norm()).sum());
    }
    let mut row_max: f64 = 0.0;
    for i in 0..r {
        row_max = row_max.max((0..c).map(|j| m[(i, j)].norm()).sum());
    }
    col_max.max(row_max)
}

/// Weighted Schur norm with weight `σ(t) = (1 + t)^β`, `t = |b − c|`.
pub fn sigma_norm(lat: &Lattice, rows: &[DualPoint], cols: &[DualPoint], m: &CMat, beta: f64) -> f64 {
    let weight = |b: DualPoint, c: DualPoint| (1.0 + lat.norm(b - c)).powf(beta);
    let mut best: f64 = 0.0;
    for (i, &b) in rows.iter().enumerate() {
        best = best.max(cols.iter().enumerate().map(|(j, &c)| m[(i, j)].norm() * weight(b, c)).sum());
    }
    for (j, &c) in cols.iter().enumerate() {
        best = best.max(rows.iter().enumerate().map(|(i, &b)| m[(i, j)].norm() * weight(b, c)).sum());
    }
    best
}

/// Smallest singular value (dense SVD).
pub fn sigma_min(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.min()
}

/// Largest singular value (dense SVD).
pub fn sigma_max(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// `(1 + (2Λ)^{β−⌈β⌉} ⌈β⌉ m^{⌈β⌉−1}) (17/18)^m`; at `β = 0` the prefactor is 1.
pub fn decay_certificate(m: u32, beta: f64, lat: &Lattice) -> f64 {
    assert!(m >= 1, "decay_certificate needs m >= 1");
    let geo = NEUMANN_LIMIT.powi(m as i32);
    if beta == 0.0 {
        return geo;
    }
    let cb = beta.ceil();
    (1.0 + (2.0 * lat.lambda).powf(beta - cb) * cb * (m as f64).powf(cb - 1.0)) * geo
}

/// `‖q̂‖_{l¹}/(ε|v|) + (14/ε)‖Â‖_{l¹}`, the bound on `‖R_{SS} − π_S‖`.
pub fn rss_bound(model: &Model, k: &KPoint) -> f64 {
    let eps = model.params.epsilon;
    model.q_l1() / (eps * k.v_norm()) + 14.0 / eps * model.a_l1()
}

/// Pointwise matrix elements of the operators on a model.
impl Model {
    #[inline]
    pub fn a_at(&self, b: DualPoint) -> CVec2 {
        self.a.get(b)
    }

    #[inline]
    pub fn q_at(&self, b: DualPoint) -> C {
        self.q.get(b)
    }

    /// `h_{bc} = −2(c+k)·Â(b−c)`.
    pub fn h_entry(&self, k: &KPoint, b: DualPoint, c: DualPoint) -> C {
        let a = self.a_at(b - c);
        let cc = self.lattice.point(c);
        -2.0 * ((k.k1 + cc[0]) * a[0] + (k.k2 + cc[1]) * a[1])
    }

    /// `w_{bc} = h_{bc} + q̂(b−c)`.
    pub fn w_entry(&self, k: &KPoint, b: DualPoint, c: DualPoint) -> C {
        self.h_entry(k, b, c) + self.q_at(b - c)
    }

    pub fn n_at(&self, b: DualPoint, k: &KPoint) -> C {
        n_full_at(self.lattice.point(b), k)
    }
}

/// `Δ_k` on the given index set.
pub fn delta_matrix(model: &Model, pts: &[DualPoint], k: &KPoint) -> TruncatedOperator {
    let n = pts.len();
    let m = CMat::from_fn(n, n, |i, j| if i == j { model.n_at(pts[i], k) } else { ZERO });
    TruncatedOperator::new(pts.to_vec(), pts.to_vec(), m)
}

/// `π_B w π_C`.
pub fn w_matrix(model: &Model, rows: &[DualPoint], cols: &[DualPoint], k: &KPoint) -> TruncatedOperator {
    let m = CMat::from_fn(rows.len(), cols.len(), |i, j| model.w_entry(k, rows[i], cols[j]));
    TruncatedOperator::new(rows.to_vec(), cols.to_vec(), m)
}

/// `π_B R π_C` with `R_{bc} = δ_{bc} + w_{bc}/N_c`.
pub fn r_matrix(model: &Model, rows: &[DualPoint], cols: &[DualPoint], k: &KPoint) -> Result<TruncatedOperator> {
    let ninv = inverse_denominators(model, cols, k)?;
    let m = CMat::from_fn(rows.len(), cols.len(), |i, j| {
        let delta = if rows[i] == cols[j] { C::new(1.0, 0.0) } else { ZERO };
        delta + model.w_entry(k, rows[i], cols[j]) * ninv[j]
    });
    Ok(TruncatedOperator::new(rows.to_vec(), cols.to_vec(), m))
}

/// `H_k(A, V) = Δ_k + h + q` on the given index set.
pub fn hk_matrix(model: &Model, pts: &[DualPoint], k: &KPoint) -> TruncatedOperator {
    let m = CMat::from_fn(pts.len(), pts.len(), |i, j| {
        let diag = if i == j { model.n_at(pts[i], k) } else { ZERO };
        diag + model.w_entry(k, pts[i], pts[j])
    });
    TruncatedOperator::new(pts.to_vec(), pts.to_vec(), m)
}

fn inverse_denominators(model: &Model, pts: &[DualPoint], k: &KPoint) -> Result<Vec<C>> {
    pts.iter()
        .map(|&c| {
            let n = model.n_at(c, k);
            if n.norm() < SINGULAR_DENOMINATOR {
                Err(Error::SingularDenominator { b: c, modulus: n.norm() })
            } else {
                Ok(1.0 / n)
            }
        })
        .collect()
}

/// Record of the Neumann certificate for `R_{G'G'}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RggCertificate {
    /// The a-priori bound `‖q̂‖/(ε|v|) + 14‖Â‖/ε`.
    pub rss_bound: f64,
    /// Measured Schur norm of `R − I`.
    pub r_minus_i: f64,
    /// Measured Schur norm of `R⁻¹ − I`.
    pub rinv_minus_i: f64,
    /// `18 ‖R − I‖` with the measured norm.
    pub inverse_bound: f64,
    /// Whether `rss_bound < 17/18` (otherwise the inverse was forced).
    pub certified: bool,
}

impl RggCertificate {
    pub fn margin(&self) -> f64 {
        NEUMANN_LIMIT - self.rss_bound
    }
}

/// Dense inverse of `R_{G'G'}` on the window, with its certificate.
///
/// Fails with `CertificateFail` when `rss_bound ≥ 17/18` unless `force` is
/// set, in which case the inverse is computed and marked uncertified.
pub fn invert_rgg(
    model: &Model,
    window: &IndexWindow,
    k: &KPoint,
    force: bool,
) -> Result<(TruncatedOperator, RggCertificate)> {
    let bound = rss_bound(model, k);
    let certified = bound < NEUMANN_LIMIT;
    if !certified && !force {
        return Err(Error::CertificateFail { bound });
    }
    let r = r_matrix(model, &window.gprime, &window.gprime, k)?;
    let n = r.rows.len();
    let id = CMat::identity(n, n);
    let inv = dense_inverse(&r.entries)?;
    let r_minus_i = schur_norm(&(&r.entries - &id));
    let rinv_minus_i = schur_norm(&(&inv - &id));
    let cert = RggCertificate { rss_bound: bound, r_minus_i, rinv_minus_i, inverse_bound: 18.0 * r_minus_i, certified };
    Ok((TruncatedOperator::new(r.rows, r.cols, inv), cert))
}

/// LU inverse, rejecting (numerically) singular input.
pub fn dense_inverse(m: &CMat) -> Result<CMat> {
    let lu = m.clone().lu();
    check_lu(&lu)?;
    lu.try_inverse().ok_or_else(|| Error::NumericallySingular("LU inverse failed".into()))
}

/// Rejects LU factors whose pivots spread over more than `1e15`.
pub fn check_lu(lu: &nalgebra::LU<C, nalgebra::Dyn, nalgebra::Dyn>) -> Result<()> {
    let u = lu.u();
    let n = u.nrows().min(u.ncols());
    if n == 0 {
        return Ok(());
    }
    let piv: Vec<f64> = (0..n).map(|i| u[(i, i)].norm()).collect();
    let (lo, hi) = piv.iter().fold((f64::MAX, 0.0f64), |(lo, hi), &p| (lo.min(p), hi.max(p)));
    if !(lo > 1e-15 * hi) || !hi.is_finite() {
        return Err(Error::NumericallySingular(format!("pivot ratio {:.3e}", lo / hi)));
    }
    Ok(())
}

/// Partial sums `Σ_{j≤J} (−T)^j` of the Neumann series of `R = I + T`.
pub fn neumann_partial_sums(r: &CMat, terms: usize) -> Vec<CMat> {
    let n = r.nrows();
    let id = CMat::identity(n, n);
    let t = r - &id;
    let mut power = id.clone();
    let mut sum = id;
    let mut out = vec![sum.clone()];
    for _ in 0..terms {
        power = -(&t * &power);
        sum += &power;
        out.push(sum.clone());
    }
    out
}

/// Measured vs. stated bounds for `π_B q Δ⁻¹ π_C`, `π_B (A·i∇) Δ⁻¹ π_C` and
/// `π_B (k·A) Δ⁻¹ π_C`: `(measured Schur norm, bound)` for each.
pub fn bd1_triple(model: &Model, rows: &[DualPoint], cols: &[DualPoint], k: &KPoint) -> Result<[(f64, f64); 3]> {
    let lat = &model.lattice;
    let ninv = inverse_denominators(model, cols, k)?;
    let q_op = CMat::from_fn(rows.len(), cols.len(), |i, j| model.q_at(rows[i] - cols[j]) * ninv[j]);
    // i∇ e^{ic·x} = −c e^{ic·x}
    let a_grad = CMat::from_fn(rows.len(), cols.len(), |i, j| {
        -rdot(lat.point(cols[j]), model.a_at(rows[i] - cols[j])) * ninv[j]
    });
    let k_a = CMat::from_fn(rows.len(), cols.len(), |i, j| {
        let a = model.a_at(rows[i] - cols[j]);
        (k.k1 * a[0] + k.k2 * a[1]) * ninv[j]
    });
    let sup_inv = ninv.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let sup_c = cols.iter().zip(&ninv).map(|(c, x)| lat.norm(*c) * x.norm()).fold(0.0, f64::max);
    let knorm = (k.k1.norm_sqr() + k.k2.norm_sqr()).sqrt();
    let (ql1, al1) = (model.q_l1(), model.a_l1());
    Ok([
        (schur_norm(&q_op), ql1 * sup_inv),
        (schur_norm(&a_grad), al1 * sup_c),
        (schur_norm(&k_a), al1 * knorm * sup_inv),
    ])
}

/// Estimated truncation error of the `G'` sums for a window.
///
/// Chains that leave the window must take at least `⌊W/s⌋` steps of the
/// potential (support radius `s`), each contracting by `rss_bound`; terms
/// coupling `G` directly to points outside the window are added exactly.
pub fn tail_budget(model: &Model, window: &IndexWindow, k: &KPoint) -> f64 {
    let lat = &model.lattice;
    let s = model.q.support_radius(lat).max(model.a.support_radius(lat));
    if s == 0.0 || model.is_free() {
        return 0.0;
    }
    let kappa = rss_bound(model, k).min(0.999);
    let scale = model.params.epsilon * k.v_norm();
    let knorm = (k.k1.norm_sqr() + k.k2.norm_sqr()).sqrt();
    let inside: std::collections::BTreeSet<DualPoint> = window.all_points.iter().copied().collect();
    let mut row_l1: f64 = 0.0;
    let mut out_l1: f64 = 0.0;
    for &d in &window.g_set {
        let reach = knorm + lat.norm(d) + s;
        let mut row = model.q_l1() + 2.0 * reach * model.a_l1();
        let mut out = 0.0;
        for (b, x) in model.q.iter() {
            if !inside.contains(&(d - b)) {
                out += x.norm();
            }
        }
        for (b, x) in model.a.iter() {
            if !inside.contains(&(d - b)) {
                out += 2.0 * reach * crate::fourier::FieldValue::norm(&x);
            }
        }
        row = row.max(out);
        row_l1 = row_l1.max(row);
        out_l1 = out_l1.max(out);
    }
    let steps = (window.radius / s).floor() as i32;
    (2.0 * out_l1 * row_l1 + row_l1 * row_l1 * kappa.powi(steps.max(0))) / (scale * (1.0 - kappa))
}
