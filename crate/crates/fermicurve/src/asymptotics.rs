//! Large-`|z|` structure of the coefficient sums around one tube.
//!
//! Near a tube `T_μ(d')` the sums `Φ_{d',d'}` are split by distance from
//! `d'`: the near field `G'_3` (radius `split/2`) is resolved exactly, with
//! `T = X + Y` where `Y` collects the part of `T` that does not decay in
//! `z = z_{μ,d'}`. The resolvent on the near field is then
//! `(I − T₃₃)⁻¹ = S + W + Z`, `S = (I − Y₃₃)⁻¹`, `W` linear in `X`, and `Z`
//! the rest, which yields the pieces `α⁽¹⁾ ~ 1/z`, `α⁽²⁾ ~ 1/z²` and a
//! remainder `α⁽³⁾`.
//!
//! Conventions follow [`crate::freecurve`]: `w = w_{μ,d'}`, `z = z_{μ,d'}`,
//! and for every `c`, `N_c = (w − 2iθ_{μ'}(c−d'))(z − 2iθ_μ(c−d'))`.

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{rdot, Model, VectorField, ZERO};
use crate::freecurve::{in_tube, other, theta, theta_c, w_coord, z_coord, KPoint, I};
use crate::lattice::{DualPoint, Lattice};
use crate::operator::{dense_inverse, schur_norm, CMat, IndexWindow, SINGULAR_DENOMINATOR};
use crate::reduction::{Reducer, Resolvent};

const ONE: C = C { re: 1.0, im: 0.0 };

/// Near and far index sets around `d'` inside a window's `G'`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitWindows {
    pub mu: u8,
    pub dprime: DualPoint,
    /// The split radius (written `R` in the estimates).
    pub split: f64,
    /// `|b − d'| < split/4`.
    pub g1: Vec<DualPoint>,
    /// `G' ∖ G'_1`.
    pub g2: Vec<DualPoint>,
    /// `|b − d'| < split/2`.
    pub g3: Vec<DualPoint>,
    /// `G' ∖ G'_3`.
    pub g4: Vec<DualPoint>,
}

impl SplitWindows {
    /// Splits `window.gprime` about `d'`. The window must contain every
    /// dual point within `split/2` of `d'`, otherwise the near field would
    /// be truncated.
    pub fn new(lat: &Lattice, window: &IndexWindow, mu: u8, dprime: DualPoint, split: f64) -> Result<Self> {
        if !(split > 0.0) {
            return Err(Error::InvalidParameter(format!("split radius {split} must be positive")));
        }
        let centre = lat.point(dprime);
        for b in lat.enumerate_ball(centre, 0.5 * split) {
            if lat.norm(b - dprime) < 0.5 * split && window.all_points.binary_search(&b).is_err() {
                return Err(Error::InvalidParameter(format!(
                    "window of radius {} does not contain the near field of radius {} about {dprime}",
                    window.radius,
                    0.5 * split
                )));
            }
        }
        let dist = |b: &DualPoint| lat.norm(*b - dprime);
        let (g1, g2) = window.gprime.iter().copied().partition(|b| dist(b) < 0.25 * split);
        let (g3, g4) = window.gprime.iter().copied().partition(|b| dist(b) < 0.5 * split);
        Ok(SplitWindows { mu, dprime, split, g1, g2, g3, g4 })
    }

    /// The split about `d'` of a reducer's window with the default radius.
    pub fn for_reducer(red: &Reducer, mu: u8, dprime: DualPoint) -> Result<Self> {
        Self::new(&red.model.lattice, &red.window, mu, dprime, default_split(&red.model))
    }

    /// `(w_{μ,d'}, z_{μ,d'})` at `k`.
    pub fn frame(&self, lat: &Lattice, k: &KPoint) -> (C, C) {
        (w_coord(lat, self.mu, self.dprime, k), z_coord(lat, self.mu, self.dprime, k))
    }

    /// `2|z_{μ,d'}(k)| − split`, the quantity the near-field estimates decay in.
    pub fn z_r(&self, lat: &Lattice, k: &KPoint) -> f64 {
        2.0 * self.frame(lat, k).1.norm() - self.split
    }
}

/// `max(R, 4(s + Λ))` with `s` the support radius of `Â`: the smallest
/// split whose inner set `G'_1` contains the whole support of `Â`.
pub fn default_split(model: &Model) -> f64 {
    let lat = &model.lattice;
    let s = model.a.support_radius(lat);
    model.params.radius_r.max(4.0 * (s + lat.lambda))
}

/// `‖θ_μ(Â)‖_{l¹}`.
pub fn theta_a_l1(a: &VectorField, mu: u8) -> f64 {
    a.iter().map(|(_, x)| theta_c(mu, x).norm()).sum()
}

/// `X₃₃` and `Y₃₃` on the near field `G'_3`, rows and columns in the
/// order of [`SplitWindows::g3`].
#[derive(Clone, Debug)]
pub struct XyMatrices {
    pub x: CMat,
    pub y: CMat,
    /// `N_c(k)` for `c ∈ G'_3`.
    pub n: Vec<C>,
}

fn near_denominator(mu: u8, w: C, z: C, cd: [f64; 2], c: DualPoint) -> Result<(C, C)> {
    let a = w - 2.0 * I * theta(other(mu), cd);
    let b = z - 2.0 * I * theta(mu, cd);
    let n = a * b;
    if n.norm() < SINGULAR_DENOMINATOR {
        return Err(Error::SingularDenominator { b: c, modulus: n.norm() });
    }
    Ok((a, b))
}

/// `X_{bc} = [2(c−d')·Â(b−c) − q̂(b−c) − 2iθ_μ(Â(b−c)) w] / N_c` and
/// `Y_{bc} = −2iθ_{μ'}(Â(b−c)) z / N_c` on `G'_3 × G'_3`.
pub fn xy_matrices(model: &Model, sp: &SplitWindows, k: &KPoint) -> Result<XyMatrices> {
    let lat = &model.lattice;
    let (w, z) = sp.frame(lat, k);
    let mu = sp.mu;
    let m = sp.g3.len();
    let mut n = Vec::with_capacity(m);
    let mut cd = Vec::with_capacity(m);
    for &c in &sp.g3 {
        let p = lat.point(c - sp.dprime);
        let (a, b) = near_denominator(mu, w, z, p, c)?;
        n.push(a * b);
        cd.push(p);
    }
    let mut x = CMat::zeros(m, m);
    let mut y = CMat::zeros(m, m);
    for (i, &b) in sp.g3.iter().enumerate() {
        for (j, &c) in sp.g3.iter().enumerate() {
            let a = model.a_at(b - c);
            let q = model.q_at(b - c);
            x[(i, j)] = (2.0 * rdot(cd[j], a) - q - 2.0 * I * theta_c(mu, a) * w) / n[j];
            y[(i, j)] = -2.0 * I * theta_c(other(mu), a) * z / n[j];
        }
    }
    Ok(XyMatrices { x, y, n })
}

/// `T_{bc} = −w_{bc}/N_c` on the given index set.
pub fn t_matrix(model: &Model, pts: &[DualPoint], k: &KPoint) -> Result<CMat> {
    let mut ninv = Vec::with_capacity(pts.len());
    for &c in pts {
        let n = model.n_at(c, k);
        if n.norm() < SINGULAR_DENOMINATOR {
            return Err(Error::SingularDenominator { b: c, modulus: n.norm() });
        }
        ninv.push(1.0 / n);
    }
    Ok(CMat::from_fn(pts.len(), pts.len(), |i, j| -model.w_entry(k, pts[i], pts[j]) * ninv[j]))
}

/// The a-priori bounds `(20‖Â‖ + 4‖q̂‖/Λ)/(2|z|−R)` on `‖X₃₃‖` and
/// `(8/Λ)‖θ_{μ'}(Â)‖` on `‖Y₃₃‖`.
pub fn xy_bounds(model: &Model, sp: &SplitWindows, k: &KPoint) -> (f64, f64) {
    let lam = model.lattice.lambda;
    let zr = sp.z_r(&model.lattice, k);
    let xb = (20.0 * model.a_l1() + 4.0 * model.q_l1() / lam) / zr;
    let yb = 8.0 / lam * theta_a_l1(&model.a, other(sp.mu));
    (if zr > 0.0 { xb } else { f64::INFINITY }, yb)
}

/// `S = (I − Y)⁻¹`, `W = Σ_j W_j` and `Z = Σ_{j≥2} (T^j − W_j − Y^j)`
/// with `T = X + Y` and `W_j` the part of `T^j` linear in `X`.
#[derive(Clone, Debug)]
pub struct SwzSeries {
    pub s: CMat,
    pub w: CMat,
    pub z: CMat,
    /// Highest power of `T` summed.
    pub terms: usize,
    /// Certified bound on the omitted tails of `W` and `Z`.
    pub tail: f64,
}

const SERIES_MAX_TERMS: usize = 400;

/// Sums the `W` and `Z` series until the geometric tail bounds
/// `Σ_{j>J} j‖X‖‖Y‖^{j−1}` and `Σ_{j>J} [(‖X‖+‖Y‖)^j − ‖Y‖^j − j‖X‖‖Y‖^{j−1}]`
/// drop below `tol`.
pub fn swz_series(x: &CMat, y: &CMat, tol: f64) -> Result<SwzSeries> {
    let nx = schur_norm(x);
    let ny = schur_norm(y);
    if !(ny < 1.0) || !(nx + ny < 1.0) {
        return Err(Error::NotContracting(format!("||X|| = {nx:.4e}, ||Y|| = {ny:.4e}")));
    }
    let m = x.nrows();
    let id = CMat::identity(m, m);
    let s = if m == 0 { id.clone() } else { dense_inverse(&(&id - y))? };
    let t = x + y;
    let nt = nx + ny;
    // Tail sums Σ_{j>J} of j·a^{j−1} and of b^j, in closed form.
    let lin_tail = |a: f64, j: usize| -> f64 {
        let jf = j as f64;
        if a == 0.0 {
            return 0.0;
        }
        ((jf + 1.0) * a.powi(j as i32) - jf * a.powi(j as i32 + 1)) / (1.0 - a).powi(2)
    };
    let geo_tail = |b: f64, j: usize| -> f64 { b.powi(j as i32 + 1) / (1.0 - b) };

    let mut wj = x.clone();
    let mut w = x.clone();
    let mut z = CMat::zeros(m, m);
    let mut ypow = y.clone(); // Y^{j−1} at the start of step j
    let mut tpow = t.clone();
    let mut j = 1;
    loop {
        let w_tail = nx * lin_tail(ny, j);
        let z_tail = (geo_tail(nt, j) - geo_tail(ny, j) - w_tail).max(0.0);
        if w_tail + z_tail < tol {
            return Ok(SwzSeries { s, w, z, terms: j, tail: w_tail + z_tail });
        }
        if j >= SERIES_MAX_TERMS {
            return Err(Error::NotContracting(format!(
                "tail {:.3e} above tolerance {tol:.1e} after {j} terms",
                w_tail + z_tail
            )));
        }
        j += 1;
        wj = y * &wj + x * &ypow;
        tpow = &t * &tpow;
        let ynext = y * &ypow;
        z += &tpow - &wj - &ynext;
        w += &wj;
        ypow = ynext;
    }
}

/// The pieces of `Φ_{d',d'}` for general `f`, `g`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaPieces {
    /// `α⁽¹⁾`, `α⁽²⁾`, `α⁽³⁾`.
    pub a1: C,
    pub a2: C,
    pub a3: C,
    /// The `k`-independent leading part of `z α⁽¹⁾`.
    pub a10: C,
    pub a11: C,
    pub a12: C,
    pub a13: C,
    /// The four remainder sums making up `α⁽³⁾`.
    pub r1: C,
    pub r2: C,
    pub r3: C,
    pub r4: C,
    /// `Φ_{d',d'}` evaluated directly.
    pub phi: C,
    /// `z_{μ,d'}(k)`.
    pub z: C,
    /// Tail of the `W`, `Z` series (absolute, in matrix norm).
    pub series_tail: f64,
}

impl AlphaPieces {
    /// `|α⁽¹⁾ + α⁽²⁾ + α⁽³⁾ − Φ|` relative to `|Φ|`.
    pub fn split_residual(&self) -> f64 {
        (self.a1 + self.a2 + self.a3 - self.phi).norm() / self.phi.norm().max(f64::MIN_POSITIVE)
    }

    /// `|z α⁽¹⁾ − Σ_j α⁽¹ʲ⁾|` relative to `|z α⁽¹⁾|`.
    pub fn refinement_residual(&self) -> f64 {
        let za = self.z * self.a1;
        (za - self.a10 - self.a11 - self.a12 - self.a13).norm() / za.norm().max(f64::MIN_POSITIVE)
    }
}

/// `Σ_{b,c} u_b M_{bc} v_c` over a subset of rows and columns.
fn bilinear(u: &[C], m: &CMat, v: &[C], rows: &[usize], cols: &[usize]) -> C {
    let mut acc = ZERO;
    for &i in rows {
        let mut row = ZERO;
        for &j in cols {
            row += m[(i, j)] * v[j];
        }
        acc += u[i] * row;
    }
    acc
}

fn positions(sub: &[DualPoint], within: &[DualPoint]) -> Vec<usize> {
    sub.iter().map(|b| within.binary_search(b).expect("subset of a sorted index set")).collect()
}

/// The `w`, `z` and `N` of every near-field point, with `f(d'−b)/N_b`
/// and `g(c−d')` sampled on `G'_3`.
struct NearField {
    xy: XyMatrices,
    fu: Vec<C>,
    gv: Vec<C>,
    in1: Vec<usize>,
}

fn near_field(
    model: &Model,
    sp: &SplitWindows,
    k: &KPoint,
    f: &dyn Fn(DualPoint) -> C,
    g: &dyn Fn(DualPoint) -> C,
) -> Result<NearField> {
    let xy = xy_matrices(model, sp, k)?;
    let fu = sp.g3.iter().zip(&xy.n).map(|(b, n)| f(sp.dprime - *b) / n).collect();
    let gv = sp.g3.iter().map(|c| g(*c - sp.dprime)).collect();
    let in1 = positions(&sp.g1, &sp.g3);
    Ok(NearField { xy, fu, gv, in1 })
}

/// `α⁽¹⁾ = Σ_{b,c∈G'_1} f(d'−b)/N_b S_{bc} g(c−d')`.
pub fn alpha1(
    model: &Model,
    sp: &SplitWindows,
    k: &KPoint,
    f: &dyn Fn(DualPoint) -> C,
    g: &dyn Fn(DualPoint) -> C,
) -> Result<C> {
    let nf = near_field(model, sp, k, f, g)?;
    let m = sp.g3.len();
    let ny = schur_norm(&nf.xy.y);
    if !(ny < 1.0) {
        return Err(Error::NotContracting(format!("||Y|| = {ny:.4e}")));
    }
    let s = dense_inverse(&(CMat::identity(m, m) - &nf.xy.y))?;
    Ok(bilinear(&nf.fu, &s, &nf.gv, &nf.in1, &nf.in1))
}

/// `(α⁽¹⁾, α⁽²⁾)`, the latter with `W` summed to `tol`.
pub fn alpha12(
    model: &Model,
    sp: &SplitWindows,
    k: &KPoint,
    f: &dyn Fn(DualPoint) -> C,
    g: &dyn Fn(DualPoint) -> C,
    tol: f64,
) -> Result<(C, C)> {
    let nf = near_field(model, sp, k, f, g)?;
    let swz = swz_series(&nf.xy.x, &nf.xy.y, tol)?;
    Ok((bilinear(&nf.fu, &swz.s, &nf.gv, &nf.in1, &nf.in1), bilinear(&nf.fu, &swz.w, &nf.gv, &nf.in1, &nf.in1)))
}

/// All pieces of `Φ_{d',d'}` at the resolvent's `k`.
pub fn alpha_split(
    res: &Resolvent,
    sp: &SplitWindows,
    f: &dyn Fn(DualPoint) -> C,
    g: &dyn Fn(DualPoint) -> C,
    tol: f64,
) -> Result<AlphaPieces> {
    let model = &res.red.model;
    let lat = &model.lattice;
    let k = res.k;
    let (w, z) = sp.frame(lat, &k);
    let (mu, mup) = (sp.mu, other(sp.mu));
    let nf = near_field(model, sp, &k, f, g)?;
    let swz = swz_series(&nf.xy.x, &nf.xy.y, tol)?;
    let (fu, gv, in1) = (&nf.fu, &nf.gv, &nf.in1);
    let m = sp.g3.len();

    let a1 = bilinear(fu, &swz.s, gv, in1, in1);
    let a2 = bilinear(fu, &swz.w, gv, in1, in1);
    let r4 = bilinear(fu, &swz.z, gv, in1, in1);

    // Remainders through the full resolvent on G'.
    let gp = &res.red.window.gprime;
    let rinv = res.inverse()?;
    let ninv = res.inverse_denominators();
    let fu_all: Vec<C> = gp.iter().zip(ninv).map(|(b, n)| f(sp.dprime - *b) * n).collect();
    let gv_all: Vec<C> = gp.iter().map(|c| g(*c - sp.dprime)).collect();
    let p1 = positions(&sp.g1, gp);
    let p2 = positions(&sp.g2, gp);
    let pall: Vec<usize> = (0..gp.len()).collect();
    let r1 = bilinear(&fu_all, &rinv, &gv_all, &p1, &p2);
    let r2 = bilinear(&fu_all, &rinv, &gv_all, &p2, &pall);
    let near_inv = dense_inverse(&(CMat::identity(m, m) - &nf.xy.x - &nf.xy.y))?;
    let mut r3 = ZERO;
    for (a, &i) in in1.iter().enumerate() {
        for (b, &j) in in1.iter().enumerate() {
            r3 += fu[i] * (rinv[(p1[a], p1[b])] - near_inv[(i, j)]) * gv[j];
        }
    }
    let phi = res.phi_sum(f, g, sp.dprime, sp.dprime)?;

    // z/N_c = η⁰_c + η^w_c + η^z_c.
    let mut e0 = Vec::with_capacity(m);
    let mut ew = Vec::with_capacity(m);
    let mut ez = Vec::with_capacity(m);
    for &c in &sp.g3 {
        let cd = lat.point(c - sp.dprime);
        let tp = 2.0 * I * theta(mup, cd);
        let t = 2.0 * I * theta(mu, cd);
        e0.push(-1.0 / tp);
        ew.push(w / (tp * (w - tp)));
        ez.push(t / ((w - tp) * (z - t)));
    }
    let ya = CMat::from_fn(m, m, |i, j| -2.0 * I * theta_c(mup, model.a_at(sp.g3[i] - sp.g3[j])));
    let scale_cols = |e: &[C]| CMat::from_fn(m, m, |i, j| ya[(i, j)] * e[j]);
    let (y0, yw, yz) = (scale_cols(&e0), scale_cols(&ew), scale_cols(&ez));
    let id = CMat::identity(m, m);
    let sy2 = &swz.s * &nf.xy.y * &nf.xy.y;
    let scale_rows = |e: &[C], mat: &CMat| CMat::from_fn(m, m, |i, j| e[i] * mat[(i, j)]);
    let e0w: Vec<C> = e0.iter().zip(&ew).map(|(a, b)| a + b).collect();
    let k0 = scale_rows(&e0, &(&id + &y0));
    let k1 = scale_rows(&e0, &yw) + scale_rows(&ew, &(&id + &y0 + &yw));
    let k2 = scale_rows(&e0w, &sy2);
    let k3 = scale_rows(&e0w, &yz) + scale_rows(&ez, &swz.s);
    let fr: Vec<C> = sp.g3.iter().map(|b| f(sp.dprime - *b)).collect();

    Ok(AlphaPieces {
        a1,
        a2,
        a3: r1 + r2 + r3 + r4,
        a10: bilinear(&fr, &k0, gv, in1, in1),
        a11: bilinear(&fr, &k1, gv, in1, in1),
        a12: bilinear(&fr, &k2, gv, in1, in1),
        a13: bilinear(&fr, &k3, gv, in1, in1),
        r1,
        r2,
        r3,
        r4,
        phi,
        z,
        series_tail: swz.tail,
    })
}

/// `α⁽¹'⁰⁾ = −Σ_{b,c∈G'_1} f(d'−b)/(2iθ_{μ'}(b−d')) [δ_{bc} + θ_{μ'}(Â(b−c))/θ_{μ'}(c−d')] g(c−d')`.
pub fn alpha10(
    lat: &Lattice,
    a: &VectorField,
    mu: u8,
    dprime: DualPoint,
    g1: &[DualPoint],
    f: &dyn Fn(DualPoint) -> C,
    g: &dyn Fn(DualPoint) -> C,
) -> C {
    let mup = other(mu);
    let th = |b: DualPoint| theta(mup, lat.point(b - dprime));
    let mut acc = ZERO;
    for &b in g1 {
        let fb = f(dprime - b);
        if fb == ZERO {
            continue;
        }
        let mut inner = g(b - dprime);
        for &c in g1 {
            let ab = a.get(b - c);
            if ab != [ZERO, ZERO] {
                inner += theta_c(mup, ab) / th(c) * g(c - dprime);
            }
        }
        acc -= fb / (2.0 * I * th(b)) * inner;
    }
    acc
}

/// The inner index set `{b ≠ 0 : |b| < split/4}` used by [`beta2_10`].
pub fn inner_set(lat: &Lattice, split: f64) -> Vec<DualPoint> {
    lat.enumerate_ball([0.0, 0.0], 0.25 * split)
        .into_iter()
        .filter(|b| !b.is_zero() && lat.norm(*b) < 0.25 * split)
        .collect()
}

/// The constant part of the `z²` coefficient on the sheet `T_ν(0)`:
/// `2i Σ_{b,c∈G'_1} θ_{ν'}(Â(−b))/θ_{ν'}(b) [δ_{bc} + θ_{ν'}(Â(b−c))/θ_{ν'}(c)] θ_{ν'}(Â(c))`.
///
/// It is `−α⁽¹'⁰⁾_{ν,0}` with `f = g = (1, i s_ν)·Â = −2iθ_{ν'}(Â)`, the
/// vector that appears in the `z²` coefficient of `D_{0,0}`.
pub fn beta2_10(lat: &Lattice, a: &VectorField, split: f64, nu: u8) -> C {
    let fa = |b: DualPoint| -2.0 * I * theta_c(other(nu), a.get(b));
    -alpha10(lat, a, nu, DualPoint::ZERO, &inner_set(lat, split), &fa, &fa)
}

/// The same sum with the prefactor `−2i` and `θ_ν(Â(c))` in the last slot,
/// kept for comparison with the derived constant [`beta2_10`].
pub fn beta2_10_literal(lat: &Lattice, a: &VectorField, split: f64, nu: u8) -> C {
    let nup = other(nu);
    let g1 = inner_set(lat, split);
    let th = |b: DualPoint| theta(nup, lat.point(b));
    let mut acc = ZERO;
    for &b in &g1 {
        let fb = theta_c(nup, a.get(-b)) / th(b);
        if fb == ZERO {
            continue;
        }
        for &c in &g1 {
            let delta = if b == c { ONE } else { ZERO };
            acc += fb * (delta + theta_c(nup, a.get(b - c)) / th(c)) * theta_c(nu, a.get(c));
        }
    }
    -2.0 * I * acc
}

/// The explicit bounds `C₀, C₁, C₂` on `|α⁽¹'ʲ⁾|`, `j = 0, 1, 2`.
pub fn cts_constants(lat: &Lattice, a: &VectorField, mu: u8, epsilon: f64, f_l1: f64, g_l1: f64) -> [f64; 3] {
    let lam = lat.lambda;
    let t = theta_a_l1(a, other(mu));
    let fg = f_l1 * g_l1;
    [
        (1.0 + t / (2.0 * lam)) * fg / (2.0 * lam),
        epsilon / (2.0 * lam * lam) * (1.0 + 7.0 * t / (6.0 * lam)) * fg,
        64.0 / lam.powi(3) * t * t * fg,
    ]
}

/// Which diagonal entry of the reduced matrix to expand.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RemainderKind {
    /// `G = {0}`, frame `(ν, 0)`.
    Regular,
    /// `G = {0, d}`, frame `(ν, 0)`.
    Handle1,
    /// `G = {0, d}`, frame `(ν', d)`.
    Handle2,
}

/// Expansion `(N_{d'} + D_{d'd'})/z = w + β₂⁽¹⁾ z + g` in the frame
/// `(μ, d')`, with `D = β₁w² + β₂z² + β₃wz + β₄w + β₅z + β₆ + q̂(0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SheetExpansion {
    pub mu: u8,
    pub dprime: DualPoint,
    pub w: C,
    pub z: C,
    /// `β₁ … β₆`.
    pub beta: [C; 6],
    /// The `1/z` part `β₂⁽¹⁾ = −α⁽¹⁾(f = g = −2iθ_{μ'}Â)` of `β₂`.
    pub beta2_1: C,
    pub g: C,
    /// `w + β₂⁽¹⁾ z + g`.
    pub x: C,
    /// `(N_{d'} + D_{d'd'})/z` evaluated directly, for comparison with `x`.
    pub direct: C,
}

/// Builds the expansion at the resolvent's `k` in the frame of `sp`.
pub fn sheet_expansion(res: &Resolvent, sp: &SplitWindows) -> Result<SheetExpansion> {
    let model = &res.red.model;
    let lat = &model.lattice;
    let dp = sp.dprime;
    let (w, z) = sp.frame(lat, &res.k);
    let j = res.jklm(dp, dp, sp.mu)?;
    let q0 = model.q_at(DualPoint::ZERO);
    let beta = [j.j_nuprime, j.j_nu, j.k, j.l_nuprime, j.l_nu, j.m - q0];
    let fa = |b: DualPoint| -2.0 * I * theta_c(other(sp.mu), model.a_at(b));
    let beta2_1 = -alpha1(model, sp, &res.k, &fa, &fa)?;
    let g =
        beta[0] * w * w / z + (beta[1] - beta2_1) * z + beta[2] * w + beta[3] * w / z + beta[4] + beta[5] / z + q0 / z;
    let direct = (res.n(dp)? + res.d_entry(dp, dp)?) / z;
    Ok(SheetExpansion { mu: sp.mu, dprime: dp, w, z, beta, beta2_1, g, x: w + beta2_1 * z + g, direct })
}

/// Frame `(μ, d')` attached to each remainder kind for the tube index `ν`.
pub fn remainder_frame(kind: RemainderKind, nu: u8, d: Option<DualPoint>) -> Result<(u8, DualPoint)> {
    match (kind, d) {
        (RemainderKind::Regular, _) | (RemainderKind::Handle1, _) => Ok((nu, DualPoint::ZERO)),
        (RemainderKind::Handle2, Some(d)) => Ok((other(nu), d)),
        (RemainderKind::Handle2, None) => Err(Error::InvalidParameter("the second handle remainder needs d".into())),
    }
}

/// The remainder `g` (and the full expansion) at `k`.
pub fn g_remainder(red: &Reducer, kind: RemainderKind, nu: u8, k: &KPoint) -> Result<SheetExpansion> {
    let g = red.g_set();
    let d = match kind {
        RemainderKind::Regular => {
            if g != [DualPoint::ZERO] {
                return Err(Error::InvalidParameter("the regular remainder needs G = {0}".into()));
            }
            None
        }
        _ => {
            if g.len() != 2 || !g.contains(&DualPoint::ZERO) {
                return Err(Error::InvalidParameter("handle remainders need G = {0, d}".into()));
            }
            g.iter().copied().find(|b| !b.is_zero())
        }
    };
    let (mu, dp) = remainder_frame(kind, nu, d)?;
    let res = red.resolvent(k)?;
    let sp = SplitWindows::for_reducer(red, mu, dp)?;
    sheet_expansion(&res, &sp)
}

/// The nonzero element of `G = {0, d}`.
pub fn handle_partner(red: &Reducer) -> Result<DualPoint> {
    let g = red.g_set();
    if g.len() != 2 || !g.contains(&DualPoint::ZERO) {
        return Err(Error::InvalidParameter("handle reducers need G = {0, d}".into()));
    }
    Ok(g.iter().copied().find(|b| !b.is_zero()).expect("two distinct points"))
}

/// Requires `k ∈ T_ν(0) ∩ T_{ν'}(d)` with `|v| > ρ` and no other tube.
pub fn check_handle_region(red: &Reducer, nu: u8, k: &KPoint) -> Result<DualPoint> {
    let d = handle_partner(red)?;
    let p = &red.model.params;
    let lat = &red.model.lattice;
    if !(k.v_norm() > p.rho) {
        return Err(Error::RegionViolation(format!("|v| = {:.4} does not exceed rho = {:.4}", k.v_norm(), p.rho)));
    }
    if !in_tube(lat, DualPoint::ZERO, nu, k, p.epsilon) || !in_tube(lat, d, other(nu), k, p.epsilon) {
        return Err(Error::RegionViolation(format!("k is not in T_{nu}(0) and T_{}({d})", other(nu))));
    }
    red.check_region(k)?;
    Ok(d)
}

/// `x₁ = w₁ + β₂⁽¹⁾z₁ + g₁` and `x₂ = w₂ + η₂⁽¹⁾z₂ + g₂` from the full
/// expansions, with region checks.
pub fn x_coords(red: &Reducer, nu: u8, k: &KPoint) -> Result<(SheetExpansion, SheetExpansion)> {
    check_handle_region(red, nu, k)?;
    let e1 = g_remainder(red, RemainderKind::Handle1, nu, k)?;
    let e2 = g_remainder(red, RemainderKind::Handle2, nu, k)?;
    Ok((e1, e2))
}

/// `(x₁, x₂)` as the reduced diagonal entries divided by `z₁`, `z₂`
/// (the same functions as [`x_coords`], much cheaper; no region checks).
pub fn x_coords_fast(res: &Resolvent, nu: u8, d: DualPoint) -> Result<(C, C)> {
    let lat = &res.red.model.lattice;
    let z1 = z_coord(lat, nu, DualPoint::ZERO, &res.k);
    let z2 = z_coord(lat, other(nu), d, &res.k);
    let m = res.reduced_matrix()?;
    let (i0, id) = (res.red.g_pos(DualPoint::ZERO)?, res.red.g_pos(d)?);
    Ok((m[(i0, i0)] / z1, m[(id, id)] / z2))
}

/// The off-diagonal product of the handle equation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HandleRTerm {
    /// `q̂(−d) − 2d·Â(−d)` and `q̂(d) + 2d·Â(d)`.
    pub c1: C,
    pub c2: C,
    /// `D_{0,d} − c₁` and `D_{d,0} − c₂`.
    pub p1: C,
    pub p2: C,
    pub z1: C,
    pub z2: C,
    /// `−(c₁ + p₁)(c₂ + p₂)/(z₁ z₂)`.
    pub r: C,
}

pub fn handle_constants(model: &Model, d: DualPoint) -> (C, C) {
    let dd = model.lattice.point(d);
    (model.q_at(-d) - 2.0 * rdot(dd, model.a_at(-d)), model.q_at(d) + 2.0 * rdot(dd, model.a_at(d)))
}

pub fn handle_r_term(res: &Resolvent, nu: u8, d: DualPoint) -> Result<HandleRTerm> {
    let model = &res.red.model;
    let lat = &model.lattice;
    let (c1, c2) = handle_constants(model, d);
    let d0d = res.d_entry(DualPoint::ZERO, d)?;
    let dd0 = res.d_entry(d, DualPoint::ZERO)?;
    let z1 = z_coord(lat, nu, DualPoint::ZERO, &res.k);
    let z2 = z_coord(lat, other(nu), d, &res.k);
    Ok(HandleRTerm { c1, c2, p1: d0d - c1, p2: dd0 - c2, z1, z2, r: -d0d * dd0 / (z1 * z2) })
}

/// Finite-difference estimate of one partial derivative.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivativeReport {
    pub n: u32,
    pub m: u32,
    pub value: C,
    /// Richardson estimate of the discretisation error.
    pub error: f64,
    pub step: f64,
}

type Target<'a> = dyn Fn(&KPoint) -> Result<C> + 'a;

fn unit(i: usize) -> [C; 2] {
    if i == 0 {
        [ONE, ZERO]
    } else {
        [ZERO, ONE]
    }
}

fn at(k: &KPoint, dir: [C; 2], h: C) -> KPoint {
    k.add([dir[0] * h, dir[1] * h])
}

/// First derivative along `e_i` from the four-point contour
/// `Σ_{ω⁴=1} ω⁻¹ F(k + hω e_i) / (4h)`, exact for holomorphic `F` up to `O(h⁴)`.
fn contour_first(f: &Target, k: &KPoint, i: usize, h: f64) -> Result<C> {
    let e = unit(i);
    let mut acc = ZERO;
    for om in [ONE, -ONE, I, -I] {
        acc += f(&at(k, e, om * h))? / om;
    }
    Ok(acc / (4.0 * h))
}

fn central_second(f: &Target, k: &KPoint, i: usize, j: usize, h: f64) -> Result<C> {
    let (ei, ej) = (unit(i), unit(j));
    let shift = |a: f64, b: f64| KPoint::new(k.k1 + ei[0] * a + ej[0] * b, k.k2 + ei[1] * a + ej[1] * b);
    if i == j {
        Ok((f(&shift(h, 0.0))? - 2.0 * f(k)? + f(&shift(-h, 0.0))?) / (h * h))
    } else {
        Ok((f(&shift(h, h))? - f(&shift(h, -h))? - f(&shift(-h, h))? + f(&shift(-h, -h))?) / (4.0 * h * h))
    }
}

/// `∂^{n+m} F/∂k₁ⁿ∂k₂ᵐ` for `n + m ≤ 2`, with Richardson extrapolation
/// over the steps `h` and `h/2`. First derivatives use the holomorphic
/// contour stencil, second derivatives central differences.
///
/// Fails with `StepTooLarge` when the Richardson error exceeds 10% of the
/// value.
pub fn fd_derivative_check(f: &Target, k: &KPoint, n: u32, m: u32, step: f64) -> Result<DerivativeReport> {
    let (value, error) = match (n, m) {
        (0, 0) => (f(k)?, 0.0),
        (1, 0) | (0, 1) => {
            let i = if n == 1 { 0 } else { 1 };
            let (d1, d2) = (contour_first(f, k, i, step)?, contour_first(f, k, i, 0.5 * step)?);
            ((16.0 * d2 - d1) / 15.0, (d2 - d1).norm() / 15.0)
        }
        (2, 0) | (0, 2) | (1, 1) => {
            let (i, j) = match (n, m) {
                (2, 0) => (0, 0),
                (0, 2) => (1, 1),
                _ => (0, 1),
            };
            let (d1, d2) = (central_second(f, k, i, j, step)?, central_second(f, k, i, j, 0.5 * step)?);
            ((4.0 * d2 - d1) / 3.0, (d2 - d1).norm() / 3.0)
        }
        _ => return Err(Error::InvalidParameter(format!("derivative order ({n}, {m}) is not supported"))),
    };
    if error > 0.1 * value.norm() && error > 1e-13 {
        return Err(Error::StepTooLarge { error, value: value.norm() });
    }
    Ok(DerivativeReport { n, m, value, error, step })
}

/// Cauchy–Riemann residual for `k_i`: the mismatch between the central
/// difference along a real step and along an imaginary step, relative to
/// the derivative's size.
pub fn holomorphy_residual(f: &Target, k: &KPoint, i: usize, h: f64) -> Result<f64> {
    let e = unit(i);
    let dr = (f(&at(k, e, C::new(h, 0.0)))? - f(&at(k, e, C::new(-h, 0.0)))?) / (2.0 * h);
    let di = (f(&at(k, e, C::new(0.0, h)))? - f(&at(k, e, C::new(0.0, -h)))?) / (2.0 * I * h);
    let scale = dr.norm().max(di.norm()).max(f(k)?.norm()).max(f64::MIN_POSITIVE);
    Ok((dr - di).norm() / scale)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
