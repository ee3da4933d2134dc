//! Period lattices in the plane and their dual lattices.
//!
//! Points of the dual lattice are stored by their integer coordinates with
//! respect to the dual basis ([`DualPoint`]); differences of points are then
//! exact, which matters because every matrix element of the Fourier-space
//! operators is looked up by such a difference.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the dual lattice, in integer coordinates `m1 * dual1 + m2 * dual2`.
///
/// The derived ordering is lexicographic on `(m1, m2)`, which is the
/// deterministic order used by every enumeration in the crate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DualPoint(pub i64, pub i64);

impl DualPoint {
    pub const ZERO: DualPoint = DualPoint(0, 0);

    pub fn is_zero(self) -> bool {
        self == Self::ZERO
    }
}

impl fmt::Display for DualPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.0, self.1)
    }
}

impl Add for DualPoint {
    type Output = DualPoint;
    fn add(self, o: DualPoint) -> DualPoint {
        DualPoint(self.0 + o.0, self.1 + o.1)
    }
}

impl Sub for DualPoint {
    type Output = DualPoint;
    fn sub(self, o: DualPoint) -> DualPoint {
        DualPoint(self.0 - o.0, self.1 - o.1)
    }
}

impl Neg for DualPoint {
    type Output = DualPoint;
    fn neg(self) -> DualPoint {
        DualPoint(-self.0, -self.1)
    }
}

pub fn norm2(x: [f64; 2]) -> f64 {
    x[0].hypot(x[1])
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// A lattice `Γ` together with its dual `Γ^#` and the derived constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub gamma1: [f64; 2],
    pub gamma2: [f64; 2],
    pub dual1: [f64; 2],
    pub dual2: [f64; 2],
    /// Half the length of the shortest nonzero dual vector.
    pub lambda: f64,
    /// Circumradius of the Voronoi cell of the dual lattice at the origin.
    pub alpha: f64,
    /// Area of a fundamental cell of `Γ`.
    pub cell_area: f64,
    /// Rows map a real vector to its (real) dual-basis coordinates.
    coord: [[f64; 2]; 2],
}

impl Lattice {
    /// Builds the lattice generated by `gamma1`, `gamma2`; the dual basis is
    /// fixed by `dual_i · gamma_j = 2π δ_ij`.
    pub fn new(gamma1: [f64; 2], gamma2: [f64; 2]) -> Result<Self> {
        let det = gamma1[0] * gamma2[1] - gamma1[1] * gamma2[0];
        if !(det.abs() >= 1e-12 * norm2(gamma1) * norm2(gamma2)) || !det.is_finite() {
            return Err(Error::DegenerateLattice { det });
        }
        // D = 2π G^{-T}, with the generators as the columns of G.
        let s = 2.0 * PI / det;
        let dual1 = [s * gamma2[1], -s * gamma2[0]];
        let dual2 = [-s * gamma1[1], s * gamma1[0]];
        // m_i = gamma_i · b / 2π
        let coord =
            [[gamma1[0] / (2.0 * PI), gamma1[1] / (2.0 * PI)], [gamma2[0] / (2.0 * PI), gamma2[1] / (2.0 * PI)]];
        let mut lat = Lattice { gamma1, gamma2, dual1, dual2, lambda: 0.0, alpha: 0.0, cell_area: det.abs(), coord };
        let (r1, r2) = lat.reduced_basis();
        lat.lambda = 0.5 * norm2(lat.point(r1));
        lat.alpha = lat.voronoi_circumradius(r1, r2);
        Ok(lat)
    }

    /// The square lattice `2πℤ²`, whose dual is `ℤ²` (Λ = 1/2).
    pub fn square_2pi() -> Self {
        Self::new([2.0 * PI, 0.0], [0.0, 2.0 * PI]).expect("square lattice is nondegenerate")
    }

    /// Real coordinates of a dual point.
    pub fn point(&self, b: DualPoint) -> [f64; 2] {
        let (m1, m2) = (b.0 as f64, b.1 as f64);
        [m1 * self.dual1[0] + m2 * self.dual2[0], m1 * self.dual1[1] + m2 * self.dual2[1]]
    }

    pub fn norm(&self, b: DualPoint) -> f64 {
        norm2(self.point(b))
    }

    /// All dual points with `|b| <= radius`, lexicographically ordered.
    pub fn enumerate_dual(&self, radius: f64) -> Vec<DualPoint> {
        self.enumerate_ball([0.0, 0.0], radius)
    }

    /// All dual points with `|b - center| <= radius`, lexicographically ordered.
    pub fn enumerate_ball(&self, center: [f64; 2], radius: f64) -> Vec<DualPoint> {
        if !(radius >= 0.0) {
            return Vec::new();
        }
        let r2 = radius * radius * (1.0 + 1e-12) + 1e-24;
        let mut out = Vec::new();
        let mc = [dot(self.coord[0], center), dot(self.coord[1], center)];
        let ext = [radius * norm2(self.coord[0]), radius * norm2(self.coord[1])];
        let lo1 = (mc[0] - ext[0]).floor() as i64 - 1;
        let hi1 = (mc[0] + ext[0]).ceil() as i64 + 1;
        let lo2 = (mc[1] - ext[1]).floor() as i64 - 1;
        let hi2 = (mc[1] + ext[1]).ceil() as i64 + 1;
        for m1 in lo1..=hi1 {
            for m2 in lo2..=hi2 {
                let p = self.point(DualPoint(m1, m2));
                let d = [p[0] - center[0], p[1] - center[1]];
                if dot(d, d) <= r2 {
                    out.push(DualPoint(m1, m2));
                }
            }
        }
        out
    }

    /// Lattice point closest to `x` (ties broken by the enumeration order).
    pub fn nearest(&self, x: [f64; 2]) -> DualPoint {
        let mut radius = self.alpha.max(1e-300) * 1.000001;
        loop {
            let cands = self.enumerate_ball(x, radius);
            if let Some(best) = cands.into_iter().min_by(|a, b| {
                let da = norm2(sub(self.point(*a), x));
                let db = norm2(sub(self.point(*b), x));
                da.partial_cmp(&db).unwrap()
            }) {
                return best;
            }
            radius *= 2.0;
        }
    }

    /// Lagrange–Gauss reduction of the dual basis; the first returned vector
    /// is a shortest nonzero dual vector.
    fn reduced_basis(&self) -> (DualPoint, DualPoint) {
        let mut a = DualPoint(1, 0);
        let mut b = DualPoint(0, 1);
        if self.norm(a) > self.norm(b) {
            std::mem::swap(&mut a, &mut b);
        }
        loop {
            let pa = self.point(a);
            let pb = self.point(b);
            let mu = (dot(pa, pb) / dot(pa, pa)).round() as i64;
            let nb = DualPoint(b.0 - mu * a.0, b.1 - mu * a.1);
            if self.norm(nb) >= self.norm(a) * (1.0 - 1e-14) {
                return (a, nb);
            }
            b = a;
            a = nb;
        }
    }

    /// Circumradius of the Voronoi cell at 0: vertices are enumerated as
    /// intersections of perpendicular bisectors of pairs of neighbours.
    fn voronoi_circumradius(&self, r1: DualPoint, r2: DualPoint) -> f64 {
        let reach = (8.0 * self.lambda).max(self.norm(r1) + self.norm(r2));
        let nbrs: Vec<[f64; 2]> =
            self.enumerate_dual(reach).into_iter().filter(|b| !b.is_zero()).map(|b| self.point(b)).collect();
        let mut best: f64 = 0.0;
        for (i, &b) in nbrs.iter().enumerate() {
            for &c in &nbrs[i + 1..] {
                let det = b[0] * c[1] - b[1] * c[0];
                if det.abs() < 1e-12 * norm2(b) * norm2(c) {
                    continue;
                }
                let (hb, hc) = (0.5 * dot(b, b), 0.5 * dot(c, c));
                let p = [(hb * c[1] - hc * b[1]) / det, (b[0] * hc - c[0] * hb) / det];
                let scale = dot(p, p).max(1.0);
                if nbrs.iter().all(|&e| dot(p, e) <= 0.5 * dot(e, e) + 1e-10 * scale) {
                    best = best.max(norm2(p));
                }
            }
        }
        best
    }
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}
