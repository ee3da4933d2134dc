//! Truncated bivariate polynomials over ℂ and polynomial maps `ℂ² → ℂ²`.
//!
//! Coefficients are stored densely by total degree; every product and
//! composition is truncated at the polynomial's degree.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64 as C;

const ZERO: C = C::new(0.0, 0.0);

/// `Σ_{i+j ≤ n} c_{ij} x1^i x2^j`.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly2 {
    degree: usize,
    coef: Vec<C>,
}

impl Poly2 {
    pub fn zero(degree: usize) -> Self {
        Poly2 { degree, coef: vec![ZERO; (degree + 1) * (degree + 1)] }
    }

    pub fn constant(degree: usize, c: C) -> Self {
        let mut p = Self::zero(degree);
        p.set(0, 0, c);
        p
    }

    /// `x1` (`var = 0`) or `x2` (`var = 1`).
    pub fn variable(degree: usize, var: usize) -> Self {
        let mut p = Self::zero(degree);
        if degree >= 1 {
            if var == 0 {
                p.set(1, 0, C::new(1.0, 0.0));
            } else {
                p.set(0, 1, C::new(1.0, 0.0));
            }
        }
        p
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.degree + 1) + j
    }

    /// Coefficient of `x1^i x2^j` (zero above the degree).
    pub fn get(&self, i: usize, j: usize) -> C {
        if i + j > self.degree {
            ZERO
        } else {
            self.coef[self.idx(i, j)]
        }
    }

    pub fn set(&mut self, i: usize, j: usize, c: C) {
        assert!(i + j <= self.degree, "monomial ({i},{j}) above degree {}", self.degree);
        let k = self.idx(i, j);
        self.coef[k] = c;
    }

    pub fn add_to(&mut self, i: usize, j: usize, c: C) {
        let k = self.idx(i, j);
        self.coef[k] += c;
    }

    /// Iterator over `(i, j, c_ij)` with `i + j ≤ degree`.
    pub fn terms(&self) -> impl Iterator<Item = (usize, usize, C)> + '_ {
        (0..=self.degree).flat_map(move |i| (0..=self.degree - i).map(move |j| (i, j, self.get(i, j))))
    }

    /// Same polynomial at another truncation degree.
    pub fn truncate(&self, degree: usize) -> Self {
        let mut p = Self::zero(degree);
        for (i, j, c) in self.terms() {
            if i + j <= degree {
                p.set(i, j, c);
            }
        }
        p
    }

    /// Homogeneous part of degree `n`.
    pub fn homogeneous(&self, n: usize) -> Self {
        let mut p = Self::zero(self.degree);
        for i in 0..=n.min(self.degree) {
            if n <= self.degree {
                p.set(i, n - i, self.get(i, n - i));
            }
        }
        p
    }

    /// Horner evaluation.
    pub fn eval(&self, x: [C; 2]) -> C {
        let mut acc = ZERO;
        for i in (0..=self.degree).rev() {
            let mut row = ZERO;
            for j in (0..=self.degree - i).rev() {
                row = row * x[1] + self.get(i, j);
            }
            acc = acc * x[0] + row;
        }
        acc
    }

    /// `∂/∂x1` (`var = 0`) or `∂/∂x2`.
    pub fn derivative(&self, var: usize) -> Self {
        let mut p = Self::zero(self.degree);
        for (i, j, c) in self.terms() {
            match var {
                0 if i > 0 => p.set(i - 1, j, c * i as f64),
                1 if j > 0 => p.set(i, j - 1, c * j as f64),
                _ => {}
            }
        }
        p
    }

    pub fn gradient(&self, x: [C; 2]) -> [C; 2] {
        [self.derivative(0).eval(x), self.derivative(1).eval(x)]
    }

    pub fn hessian(&self, x: [C; 2]) -> Matrix2<C> {
        let (d1, d2) = (self.derivative(0), self.derivative(1));
        let h12 = d1.derivative(1).eval(x);
        Matrix2::new(d1.derivative(0).eval(x), h12, h12, d2.derivative(1).eval(x))
    }

    pub fn scale(&self, s: C) -> Self {
        Poly2 { degree: self.degree, coef: self.coef.iter().map(|c| c * s).collect() }
    }

    pub fn add(&self, o: &Self) -> Self {
        let deg = self.degree.max(o.degree);
        let mut p = self.truncate(deg);
        for (i, j, c) in o.terms() {
            p.add_to(i, j, c);
        }
        p
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(C::new(-1.0, 0.0)))
    }

    /// Product truncated at `self.degree`.
    pub fn mul(&self, o: &Self) -> Self {
        let n = self.degree;
        let mut p = Self::zero(n);
        for (i, j, a) in self.terms() {
            if a == ZERO {
                continue;
            }
            for (k, l, b) in o.terms() {
                if i + j + k + l <= n && b != ZERO {
                    p.add_to(i + k, j + l, a * b);
                }
            }
        }
        p
    }

    /// `self ∘ map`, truncated at `self.degree`. The map must vanish at 0
    /// for the truncation to be exact through that degree.
    pub fn compose(&self, map: &PolyMap) -> Self {
        let n = self.degree;
        let (m1, m2) = (map.0[0].truncate(n), map.0[1].truncate(n));
        let mut pow1 = vec![Self::constant(n, C::new(1.0, 0.0))];
        let mut pow2 = vec![Self::constant(n, C::new(1.0, 0.0))];
        for k in 1..=n {
            pow1.push(pow1[k - 1].mul(&m1));
            pow2.push(pow2[k - 1].mul(&m2));
        }
        let mut out = Self::zero(n);
        for i in 0..=n {
            let mut row = Self::zero(n);
            let mut any = false;
            for j in 0..=n - i {
                let c = self.get(i, j);
                if c != ZERO {
                    row = row.add(&pow2[j].scale(c));
                    any = true;
                }
            }
            if any {
                out = out.add(&pow1[i].mul(&row));
            }
        }
        out
    }

    /// Largest coefficient modulus.
    pub fn max_coefficient(&self) -> f64 {
        self.coef.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Taylor coefficients of `f(centre + x)` through total degree `degree`,
    /// from an `m × m` DFT of samples on the torus `|x1| = |x2| = radius`.
    ///
    /// Aliasing mixes `c_{ij}` with `c_{i+pm, j+qm}`, so `m` should exceed
    /// `degree` by a margin matched to the decay of the coefficients.
    pub fn fit_torus<F: Fn([C; 2]) -> C>(f: &F, centre: [C; 2], radius: f64, m: usize, degree: usize) -> Self {
        let values: Vec<C> = torus_grid(centre, radius, m).into_iter().map(f).collect();
        Self::from_torus_samples(&values, radius, m, degree)
    }

    /// Taylor coefficients from values on [`torus_grid`]`(centre, radius, m)`.
    pub fn from_torus_samples(values: &[C], radius: f64, m: usize, degree: usize) -> Self {
        assert!(m > degree, "need more samples ({m}) than the degree ({degree})");
        assert_eq!(values.len(), m * m);
        let roots: Vec<C> = (0..m).map(|p| C::from_polar(1.0, 2.0 * PI * p as f64 / m as f64)).collect();
        // separable DFT: first over q (x2), then over p (x1)
        let mut half = vec![ZERO; m * m];
        for p in 0..m {
            for j in 0..m {
                let mut s = ZERO;
                for q in 0..m {
                    s += values[p * m + q] * roots[(j * q) % m].conj();
                }
                half[p * m + j] = s;
            }
        }
        let mut poly = Self::zero(degree);
        let norm = 1.0 / (m * m) as f64;
        for i in 0..=degree {
            for j in 0..=degree - i {
                let mut s = ZERO;
                for p in 0..m {
                    s += half[p * m + j] * roots[(i * p) % m].conj();
                }
                poly.set(i, j, s * norm / radius.powi((i + j) as i32));
            }
        }
        poly
    }

    /// `v ↦ p(a + v)`, re-expanded exactly (same degree).
    pub fn shift(&self, a: [C; 2]) -> Self {
        let n = self.degree;
        let binom = |n: usize, k: usize| (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64);
        let pow = |x: C, k: usize| x.powu(k as u32);
        let mut out = Self::zero(n);
        for (i, j, c) in self.terms() {
            if c == ZERO {
                continue;
            }
            for k in 0..=i {
                let ck = c * binom(i, k) * pow(a[0], i - k);
                for l in 0..=j {
                    out.add_to(k, l, ck * binom(j, l) * pow(a[1], j - l));
                }
            }
        }
        out
    }

    /// `p(s·x)`.
    pub fn rescale(&self, s: f64) -> Self {
        let mut p = self.clone();
        for (i, j, c) in self.terms() {
            p.set(i, j, c * s.powi((i + j) as i32));
        }
        p
    }
}

/// The `m × m` sample points `centre + radius·(ω^p, ω^q)`, `ω = e^{2πi/m}`,
/// in the order expected by [`Poly2::from_torus_samples`].
pub fn torus_grid(centre: [C; 2], radius: f64, m: usize) -> Vec<[C; 2]> {
    let roots: Vec<C> = (0..m).map(|p| C::from_polar(radius, 2.0 * PI * p as f64 / m as f64)).collect();
    (0..m)
        .flat_map(|p| (0..m).map(move |q| (p, q)))
        .map(|(p, q)| [centre[0] + roots[p], centre[1] + roots[q]])
        .collect()
}

/// A polynomial map `x ↦ (p1(x), p2(x))`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyMap(pub [Poly2; 2]);

impl PolyMap {
    pub fn identity(degree: usize) -> Self {
        PolyMap([Poly2::variable(degree, 0), Poly2::variable(degree, 1)])
    }

    /// `x ↦ M x`.
    pub fn linear(degree: usize, m: &Matrix2<C>) -> Self {
        let mut p = [Poly2::zero(degree), Poly2::zero(degree)];
        for (r, pr) in p.iter_mut().enumerate() {
            if degree >= 1 {
                pr.set(1, 0, m[(r, 0)]);
                pr.set(0, 1, m[(r, 1)]);
            }
        }
        PolyMap(p)
    }

    pub fn degree(&self) -> usize {
        self.0[0].degree().max(self.0[1].degree())
    }

    pub fn eval(&self, x: [C; 2]) -> [C; 2] {
        [self.0[0].eval(x), self.0[1].eval(x)]
    }

    /// Jacobian matrix at `x`.
    pub fn jacobian(&self, x: [C; 2]) -> Matrix2<C> {
        let g0 = self.0[0].gradient(x);
        let g1 = self.0[1].gradient(x);
        Matrix2::new(g0[0], g0[1], g1[0], g1[1])
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &PolyMap) -> Self {
        PolyMap([self.0[0].compose(inner), self.0[1].compose(inner)])
    }

    pub fn add(&self, o: &PolyMap) -> Self {
        PolyMap([self.0[0].add(&o.0[0]), self.0[1].add(&o.0[1])])
    }

    pub fn sub(&self, o: &PolyMap) -> Self {
        PolyMap([self.0[0].sub(&o.0[0]), self.0[1].sub(&o.0[1])])
    }

    /// Linear part `Dψ(0)`.
    pub fn linear_part(&self) -> Matrix2<C> {
        self.jacobian([ZERO, ZERO])
    }

    /// Compositional inverse of a map with `ψ(0) = 0` and invertible linear
    /// part, truncated at the map's degree.
    ///
    /// Writes `ψ = L(id + p)` and iterates `v ← L⁻¹z − p(v)`; every pass fixes
    /// one more degree.
    pub fn revert(&self) -> Option<Self> {
        let n = self.degree();
        let l = self.linear_part();
        let linv = l.try_inverse()?;
        let normalized = PolyMap::linear(n, &linv).compose(self);
        let p = normalized.sub(&PolyMap::identity(n));
        let target = PolyMap::linear(n, &linv);
        let mut v = target.clone();
        for _ in 0..n {
            v = target.sub(&p.compose(&v));
        }
        Some(v)
    }
}

/// `‖M‖₂` of a 2×2 complex matrix.
pub fn norm2(m: &Matrix2<C>) -> f64 {
    m.svd(false, false).singular_values.max()
}

/// Solves `M x = r` for a 2×2 system.
pub fn solve2(m: &Matrix2<C>, r: [C; 2]) -> Option<[C; 2]> {
    let x = m.lu().solve(&Vector2::new(r[0], r[1]))?;
    Some([x[0], x[1]])
}
