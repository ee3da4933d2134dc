//! The free Fermi curve: the lines `N_ν(b)`, their `ε`-tubes, intersections,
//! and the classification of which tubes a momentum `k` lies in.
//!
//! Conventions: `ν ∈ {1, 2}`, `s_ν = (−1)^ν`, and
//! `N_{b,ν}(k) = (k1 + b1) + i s_ν (k2 + b2)`.

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::CVec2;
use crate::lattice::{norm2, DualPoint, Lattice};

pub const I: C = C { re: 0.0, im: 1.0 };

/// `(−1)^ν`.
#[inline]
pub fn sign(nu: u8) -> f64 {
    debug_assert!(nu == 1 || nu == 2);
    if nu == 1 {
        -1.0
    } else {
        1.0
    }
}

/// The other index, `ν' = 3 − ν`.
#[inline]
pub fn other(nu: u8) -> u8 {
    3 - nu
}

/// A point of `ℂ²` with cached real and imaginary parts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KPoint {
    pub k1: C,
    pub k2: C,
    pub u: [f64; 2],
    pub v: [f64; 2],
}

impl KPoint {
    pub fn new(k1: C, k2: C) -> Self {
        KPoint { k1, k2, u: [k1.re, k2.re], v: [k1.im, k2.im] }
    }

    pub fn from_parts(u: [f64; 2], v: [f64; 2]) -> Self {
        Self::new(C::new(u[0], v[0]), C::new(u[1], v[1]))
    }

    /// `|Im k|`.
    pub fn v_norm(&self) -> f64 {
        norm2(self.v)
    }

    pub fn u_norm(&self) -> f64 {
        norm2(self.u)
    }

    /// `k + x` for a real vector `x`.
    pub fn shift(&self, x: [f64; 2]) -> Self {
        Self::new(self.k1 + x[0], self.k2 + x[1])
    }

    pub fn add(&self, dk: [C; 2]) -> Self {
        Self::new(self.k1 + dk[0], self.k2 + dk[1])
    }

    pub fn dist(&self, o: &KPoint) -> f64 {
        ((self.k1 - o.k1).norm_sqr() + (self.k2 - o.k2).norm_sqr()).sqrt()
    }
}

/// Labels the tube `T_ν(b)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TubeIndex {
    pub b: DualPoint,
    pub nu: u8,
}

/// `N_{b,ν}(k)`, with `b` given in real coordinates.
#[inline]
pub fn n_line_at(b: [f64; 2], nu: u8, k: &KPoint) -> C {
    (k.k1 + b[0]) + I * sign(nu) * (k.k2 + b[1])
}

/// `N_{b,ν}(k)`.
pub fn n_line(lat: &Lattice, b: DualPoint, nu: u8, k: &KPoint) -> C {
    n_line_at(lat.point(b), nu, k)
}

/// `N_b(k) = N_{b,1}(k) N_{b,2}(k) = (k1 + b1)² + (k2 + b2)²`.
#[inline]
pub fn n_full_at(b: [f64; 2], k: &KPoint) -> C {
    n_line_at(b, 1, k) * n_line_at(b, 2, k)
}

pub fn n_full(lat: &Lattice, b: DualPoint, k: &KPoint) -> C {
    n_full_at(lat.point(b), k)
}

/// `θ_ν(a) = ½ ((−1)^ν a2 + i a1)` for a real vector.
#[inline]
pub fn theta(nu: u8, a: [f64; 2]) -> C {
    0.5 * C::new(sign(nu) * a[1], a[0])
}

/// `θ_ν` applied to a complex 2-vector (e.g. a value of `Â`).
#[inline]
pub fn theta_c(nu: u8, a: CVec2) -> C {
    0.5 * (sign(nu) * a[1] + I * a[0])
}

/// `θ_ν(b)` for a dual point.
pub fn theta_b(lat: &Lattice, nu: u8, b: DualPoint) -> C {
    theta(nu, lat.point(b))
}

/// `k ∈ T_ν(b)`, i.e. `|N_{b,ν}(k)| < ε` (open tube).
pub fn in_tube(lat: &Lattice, b: DualPoint, nu: u8, k: &KPoint, epsilon: f64) -> bool {
    n_line(lat, b, nu, k).norm() < epsilon
}

/// The unique point of `N_1(b) ∩ N_2(c)`:
/// `(iθ_1(c) + iθ_2(b), θ_1(c) − θ_2(b))`.
pub fn line_intersection(lat: &Lattice, b: DualPoint, c: DualPoint) -> KPoint {
    let (t1c, t2b) = (theta_b(lat, 1, c), theta_b(lat, 2, b));
    KPoint::new(I * t1c + I * t2b, t1c - t2b)
}

/// `w_{ν,d'}(k) = N_{d',ν}(k)`.
pub fn w_coord(lat: &Lattice, nu: u8, dprime: DualPoint, k: &KPoint) -> C {
    n_line(lat, dprime, nu, k)
}

/// `z_{ν,d'}(k) = N_{d',ν'}(k)`.
pub fn z_coord(lat: &Lattice, nu: u8, dprime: DualPoint, k: &KPoint) -> C {
    n_line(lat, dprime, other(nu), k)
}

/// Inverse of `k ↦ (w_{ν,d'}, z_{ν,d'})`.
pub fn k_from_wz(lat: &Lattice, nu: u8, dprime: DualPoint, w: C, z: C) -> KPoint {
    let d = lat.point(dprime);
    let s = sign(nu);
    // w + z = 2(k1 + d1), w − z = 2 i s (k2 + d2)
    let k1 = 0.5 * (w + z) - d[0];
    let k2 = (w - z) / (2.0 * I * s) - d[1];
    KPoint::new(k1, k2)
}

/// For each `ν`, the real point `b*` with `|N_{b,ν}(k)| = |b − b*|`.
pub fn tube_centre(nu: u8, k: &KPoint) -> [f64; 2] {
    let s = sign(nu);
    let c = k.k1 + I * s * k.k2;
    [-c.re, -s * c.im]
}

/// Every `(b, ν)` with `|b| ≤ window_radius` and `k ∈ T_ν(b)`, sorted.
///
/// At most two distinct `b` may occur; three signal that `ε` is too large
/// for the region (or `|v|` too small) and are reported as `TripleTube`.
pub fn active_tubes(lat: &Lattice, k: &KPoint, epsilon: f64, window_radius: f64) -> Result<Vec<TubeIndex>> {
    let mut out = Vec::new();
    for nu in [1u8, 2] {
        let centre = tube_centre(nu, k);
        for b in lat.enumerate_ball(centre, epsilon) {
            if lat.norm(b) <= window_radius && in_tube(lat, b, nu, k, epsilon) {
                out.push(TubeIndex { b, nu });
            }
        }
    }
    out.sort();
    let mut bs: Vec<DualPoint> = out.iter().map(|t| t.b).collect();
    bs.dedup();
    if bs.len() > 2 {
        return Err(Error::TripleTube(bs));
    }
    Ok(out)
}

/// The exceptional `b̃ ≠ 0` with `|N_{b̃}(k)| < (Λ/2)(|v| + |u + b̃|)`, if any.
///
/// Such a point satisfies `||u + b̃| − |v|| < Λ`, so the scan covers the
/// disc of radius `|v| + Λ` about `−u`. When found, the localisation
/// `|b̃| > |v|` and `||u+b̃| − |v|| < Λ` is checked.
pub fn exceptional_b(lat: &Lattice, k: &KPoint) -> Result<Option<DualPoint>> {
    let lam = lat.lambda;
    let vn = k.v_norm();
    let centre = [-k.u[0], -k.u[1]];
    let mut found: Option<DualPoint> = None;
    for b in lat.enumerate_ball(centre, vn + lam) {
        if b.is_zero() {
            continue;
        }
        let p = lat.point(b);
        let ub = norm2([k.u[0] + p[0], k.u[1] + p[1]]);
        if n_full_at(p, k).norm() < 0.5 * lam * (vn + ub) {
            if let Some(prev) = found {
                return Err(Error::MultipleExceptional(prev, b));
            }
            found = Some(b);
        }
    }
    if let Some(b) = found {
        let p = lat.point(b);
        let ub = norm2([k.u[0] + p[0], k.u[1] + p[1]]);
        if !(norm2(p) > vn && (ub - vn).abs() < lam) {
            return Err(Error::RelationViolated(format!(
                "exceptional b = {b}: |b| = {:.6}, |u+b| = {ub:.6}, |v| = {vn:.6}",
                norm2(p)
            )));
        }
    }
    Ok(found)
}

/// Measured ratios for the size relations between `|v|`, `|z|`, `|k2|`, `|d|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderReport {
    /// `(name, lower, middle, upper)`: the check is `lower ≤ middle ≤ upper`.
    pub checks: Vec<(String, f64, f64, f64)>,
}

impl OrderReport {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|(_, lo, mid, hi)| lo <= mid && mid <= hi)
    }
}

/// Checks, for `k ∈ T_ν(0)` (and `k ∈ T_{ν'}(d)` when `d` is given) with
/// `|v| > R`,
/// `1/|z_{ν,0}| ≤ 1/|v| ≤ 3/|z_{ν,0}|` and, without `d`,
/// `1/(4|v|) ≤ 1/|k2| ≤ 8/|v|`; with `d`, the same for `z_{ν',d}` and
/// `1/(2|z_{ν',d}|) ≤ 1/|d| ≤ 2/|z_{ν',d}|`.
pub fn order_relations(lat: &Lattice, k: &KPoint, nu: u8, d: Option<DualPoint>) -> Result<OrderReport> {
    let vinv = 1.0 / k.v_norm();
    let z0 = z_coord(lat, nu, DualPoint::ZERO, k).norm();
    let mut checks = vec![("z_nu0".to_string(), 1.0 / z0, vinv, 3.0 / z0)];
    match d {
        None => {
            let k2 = k.k2.norm();
            checks.push(("k2".to_string(), 0.25 * vinv, 1.0 / k2, 8.0 * vinv));
        }
        Some(d) => {
            let zd = z_coord(lat, other(nu), d, k).norm();
            checks.push(("z_nupd".to_string(), 1.0 / zd, vinv, 3.0 / zd));
            checks.push(("d".to_string(), 0.5 / zd, 1.0 / lat.norm(d), 2.0 / zd));
        }
    }
    let report = OrderReport { checks };
    if !report.all_hold() {
        let bad: Vec<String> = report
            .checks
            .iter()
            .filter(|(_, lo, mid, hi)| !(lo <= mid && mid <= hi))
            .map(|(n, lo, mid, hi)| format!("{n}: {lo:.4e} <= {mid:.4e} <= {hi:.4e}"))
            .collect();
        return Err(Error::RelationViolated(bad.join("; ")));
    }
    Ok(report)
}
