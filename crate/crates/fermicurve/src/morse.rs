//! Constructive Morse normal form for `f(x) = x1x2 + r(x)` on the polydisc
//! `D_δ = {|x1|, |x2| ≤ δ}`: the critical point `ξ`, the critical value `c`,
//! and a polynomial map `Φ` with `f∘Φ(z) = z1z2 + c`.
//!
//! Everything is computed in the scaled variable `X = x/δ`, where the
//! polydisc is the unit polydisc and `F(X) = f(δX)/δ² = X1X2 + r(δX)/δ²`
//! has the same second derivatives and first-derivative bound `a/δ`.
//!
//! The map is assembled in three stages: a Taylor fit of `f(ξ + y) − c`
//! by a torus DFT, a balanced factorisation of its quadratic part into two
//! linear forms `u = Ly`, and a degree-by-degree solution of
//! `ψ1ψ2 = (f(ξ + L⁻¹u) − c)` with `ψ = u + p(u)`. Then `Φ = ξ + L⁻¹ψ⁻¹`.
//! The composition residual is certified by sampling the distinguished
//! boundary of the target polydisc (the maximum principle bounds the
//! interior).

use std::f64::consts::PI;

use nalgebra::Matrix2;
use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{norm2, solve2, Poly2, PolyMap};

const ZERO: C = C::new(0.0, 0.0);

/// Numerical knobs for [`morse_solve`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorseOptions {
    /// DFT size per circle for the Taylor fits.
    pub samples: usize,
    /// First and last total degree tried for the normal-form map.
    pub min_degree: usize,
    pub max_degree: usize,
    /// Target for `max |f∘Φ − z1z2 − c|` on the certified polydisc.
    pub tol: f64,
    /// Boundary samples per circle for certification.
    pub cert_samples: usize,
    pub newton_max_iters: usize,
}

impl Default for MorseOptions {
    fn default() -> Self {
        MorseOptions { samples: 32, min_degree: 8, max_degree: 16, tol: 1e-9, cert_samples: 24, newton_max_iters: 60 }
    }
}

/// Output of [`morse_solve`].
#[derive(Clone, Debug, PartialEq)]
pub struct MorseResult {
    pub delta: f64,
    /// Critical point of `f`.
    pub xi: [C; 2],
    /// Critical value: `f∘Φ = z1z2 + c`.
    pub c: C,
    /// `max(|ξ1|, |ξ2|)`.
    pub s: f64,
    /// `|∇f(ξ)|`.
    pub grad_residual: f64,
    pub newton_iters: usize,
    /// Radius `(δ − s)(1 − 19b)` of the polydisc where `Φ` is certified.
    pub certified_radius: f64,
    /// Sampled `max |f∘Φ − z1z2 − c|` on that polydisc.
    pub composition_residual: f64,
    /// Sampled `max ‖DΦ − I‖`.
    pub dphi_deviation: f64,
    /// Total degree of the materialised map.
    pub degree: usize,
    /// Scaled map `Z ↦ Φ(δZ)/δ − ξ/δ`.
    phi: PolyMap,
    /// Scaled inverse `Y ↦ Z`.
    psi: PolyMap,
}

impl MorseResult {
    /// `Φ(z)`.
    pub fn phi(&self, z: [C; 2]) -> [C; 2] {
        let d = self.delta;
        let y = self.phi.eval([z[0] / d, z[1] / d]);
        [self.xi[0] + y[0] * d, self.xi[1] + y[1] * d]
    }

    /// `DΦ(z)`.
    pub fn phi_jacobian(&self, z: [C; 2]) -> Matrix2<C> {
        let d = self.delta;
        self.phi.jacobian([z[0] / d, z[1] / d])
    }

    /// Normal coordinates `z = Φ⁻¹(x)` of a point near `ξ` (truncated series).
    pub fn normal_coords(&self, x: [C; 2]) -> [C; 2] {
        let d = self.delta;
        let z = self.psi.eval([(x[0] - self.xi[0]) / d, (x[1] - self.xi[1]) / d]);
        [z[0] * d, z[1] * d]
    }
}

/// Sampled first- and second-derivative bounds of `r = f − x1x2` on `D_δ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorseBounds {
    /// `max_i max |∂r/∂x_i|`.
    pub a: f64,
    /// `max ‖∂²r‖`.
    pub b: f64,
}

fn torus(k: usize, radius: f64) -> impl Iterator<Item = [C; 2]> {
    let pt = move |p: usize| C::from_polar(radius, 2.0 * PI * (p as f64 + 0.5) / k as f64);
    (0..k).flat_map(move |p| (0..k).map(move |q| [pt(p), pt(q)]))
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::HypothesisFail(format!("delta = {delta} must lie in (0, 1)")));
    }
    Ok(())
}

/// Measures `a` and `b` on the torus `|x1| = |x2| = δ`, where both maxima
/// over `D_δ` are attained.
pub fn measure_bounds<F: Fn([C; 2]) -> C>(f: &F, delta: f64, opts: &MorseOptions) -> Result<MorseBounds> {
    check_delta(delta)?;
    let fit = Poly2::fit_torus(f, [ZERO, ZERO], delta, opts.samples, opts.samples - 4);
    let mut r = fit.clone();
    r.add_to(1, 1, C::new(-1.0, 0.0));
    let (d1, d2) = (r.derivative(0), r.derivative(1));
    let mut a: f64 = 0.0;
    let mut b: f64 = 0.0;
    for x in torus(opts.cert_samples.max(16), delta) {
        a = a.max(d1.eval(x).norm()).max(d2.eval(x).norm());
        b = b.max(norm2(&r.hessian(x)));
    }
    Ok(MorseBounds { a, b })
}

/// Newton on `∇F` in scaled coordinates, on a fitted Taylor polynomial.
fn newton_gradient(p: &Poly2, seed: [C; 2], max_iters: usize) -> Result<([C; 2], usize, f64)> {
    let (d1, d2) = (p.derivative(0), p.derivative(1));
    let grad = |x: [C; 2]| [d1.eval(x), d2.eval(x)];
    let mut x = seed;
    let mut g = grad(x);
    for it in 0..max_iters {
        let gn = (g[0].norm_sqr() + g[1].norm_sqr()).sqrt();
        let h = p.hessian(x);
        let Some(step) = solve2(&h, g) else {
            return Err(Error::NewtonDiverged { iters: it, residual: gn });
        };
        let next = [x[0] - step[0], x[1] - step[1]];
        if !(next[0].norm() < 2.0 && next[1].norm() < 2.0) {
            return Err(Error::NewtonDiverged { iters: it + 1, residual: gn });
        }
        x = next;
        g = grad(x);
        let small = step[0].norm().max(step[1].norm()) < 1e-15;
        if small || (g[0].norm() + g[1].norm()) == 0.0 {
            let gn = (g[0].norm_sqr() + g[1].norm_sqr()).sqrt();
            return Ok((x, it + 1, gn));
        }
    }
    let gn = (g[0].norm_sqr() + g[1].norm_sqr()).sqrt();
    if gn < 1e-12 {
        Ok((x, max_iters, gn))
    } else {
        Err(Error::NewtonDiverged { iters: max_iters, residual: gn })
    }
}

/// The critical point of `f` reached by Newton from `seed` (a point of `D_δ`).
pub fn critical_point_from<F: Fn([C; 2]) -> C>(f: &F, delta: f64, seed: [C; 2], opts: &MorseOptions) -> Result<[C; 2]> {
    check_delta(delta)?;
    let scaled = |x: [C; 2]| f([x[0] * delta, x[1] * delta]) / (delta * delta);
    let p = Poly2::fit_torus(&scaled, [ZERO, ZERO], 1.0, opts.samples, opts.samples - 4);
    let (x, _, _) = newton_gradient(&p, [seed[0] / delta, seed[1] / delta], opts.newton_max_iters)?;
    Ok([x[0] * delta, x[1] * delta])
}

/// `q(y) = g20 y1² + g11 y1y2 + g02 y2² = (σy1 + βy2)(γy1 + σy2)`, the
/// balanced factorisation, as the matrix `L = [[σ, β], [γ, σ]]`.
fn factor_quadratic(g20: C, g11: C, g02: C) -> Result<Matrix2<C>> {
    let disc = (g11 * g11 - 4.0 * g20 * g02).sqrt();
    let r1 = (g11 + disc) / 2.0;
    let r2 = (g11 - disc) / 2.0;
    let sigma2 = if r1.norm() >= r2.norm() { r1 } else { r2 };
    if disc.norm() < 1e-8 || sigma2.norm() < 1e-8 {
        return Err(Error::HypothesisFail(format!("degenerate quadratic part (discriminant {:.3e})", disc.norm())));
    }
    let sigma = sigma2.sqrt();
    Ok(Matrix2::new(sigma, g02 / sigma, g20 / sigma, sigma))
}

/// `ψ = u + p(u)` with `ψ1ψ2 = h`, for `h = u1u2 + O(|u|³)`.
///
/// At degree `n` the equation is `u2 p1 + u1 p2 = h_n − (p1p2)_n`. A monomial
/// `u1^i u2^j` goes to `p2` if `i > j`, to `p1` if `i < j` and half to each
/// if `i = j`, which keeps the construction symmetric under `u1 ↔ u2`.
fn homological(h: &Poly2, degree: usize) -> PolyMap {
    let mut p1 = Poly2::zero(degree);
    let mut p2 = Poly2::zero(degree);
    for n in 3..=degree {
        let prod = p1.mul(&p2);
        for i in 0..=n {
            let j = n - i;
            let r = h.get(i, j) - prod.get(i, j);
            if r == ZERO {
                continue;
            }
            if i > j {
                p2.add_to(i - 1, j, r);
            } else if i < j {
                p1.add_to(i, j - 1, r);
            } else {
                p2.add_to(i - 1, j, r / 2.0);
                p1.add_to(i, j - 1, r / 2.0);
            }
        }
    }
    PolyMap::identity(degree).add(&PolyMap([p1, p2]))
}

/// Morse normal form of `f = x1x2 + r` on `D_δ`.
///
/// `a_bound` and `b_bound` are the caller's bounds on the first and second
/// derivatives of `r`; they enter the hypotheses (`a < δ`, `b < 1/55`) and
/// the certified radius `(δ − s)(1 − 19b)`.
pub fn morse_solve<F: Fn([C; 2]) -> C>(
    f: &F,
    delta: f64,
    a_bound: f64,
    b_bound: f64,
    opts: &MorseOptions,
) -> Result<MorseResult> {
    check_delta(delta)?;
    if !(0.0..delta).contains(&a_bound) {
        return Err(Error::HypothesisFail(format!("a = {a_bound:.4e} must satisfy 0 <= a < delta = {delta}")));
    }
    if !(0.0..1.0 / 55.0).contains(&b_bound) {
        return Err(Error::HypothesisFail(format!("b = {b_bound:.4e} must satisfy 0 <= b < 1/55")));
    }
    let big = |x: [C; 2]| f([x[0] * delta, x[1] * delta]) / (delta * delta);

    // critical point
    let fit = Poly2::fit_torus(&big, [ZERO, ZERO], 1.0, opts.samples, opts.samples - 4);
    let (xi, newton_iters, _) = newton_gradient(&fit, [ZERO, ZERO], opts.newton_max_iters)?;
    let s = xi[0].norm().max(xi[1].norm());
    if s > a_bound / delta * (1.0 + 1e-9) + 1e-14 {
        return Err(Error::HypothesisFail(format!(
            "critical point at distance {:.4e} exceeds the first-derivative bound a = {a_bound:.4e}",
            s * delta
        )));
    }
    let c = big(xi);
    let grad = fit.gradient(xi);
    let grad_residual = (grad[0].norm_sqr() + grad[1].norm_sqr()).sqrt() * delta;

    // Taylor fit of g(y) = F(ξ + y) − c
    let rho = 1.0 - s;
    let g_full = Poly2::fit_torus(
        &|y: [C; 2]| big([xi[0] + y[0], xi[1] + y[1]]) - c,
        [ZERO, ZERO],
        rho,
        opts.samples,
        opts.max_degree,
    );
    let l = factor_quadratic(g_full.get(2, 0), g_full.get(1, 1), g_full.get(0, 2))?;
    let linv = l.try_inverse().ok_or_else(|| Error::HypothesisFail("singular quadratic factorisation".into()))?;

    let r_cert = rho * (1.0 - 19.0 * b_bound);
    let mut last: Option<(f64, usize)> = None;
    let mut degree = opts.min_degree;
    loop {
        let mut g = g_full.truncate(degree);
        g.set(0, 0, ZERO);
        g.set(1, 0, ZERO);
        g.set(0, 1, ZERO);
        let h = g.compose(&PolyMap::linear(degree, &linv));
        let psi0 = homological(&h, degree);
        let psi = psi0.compose(&PolyMap::linear(degree, &l));
        let phi = psi.revert().ok_or_else(|| Error::HypothesisFail("normal-form map is not invertible".into()))?;

        let mut residual: f64 = 0.0;
        let mut dev: f64 = 0.0;
        for z in torus(opts.cert_samples, r_cert) {
            let y = phi.eval(z);
            let val = big([xi[0] + y[0], xi[1] + y[1]]) - z[0] * z[1] - c;
            residual = residual.max(val.norm());
            dev = dev.max(norm2(&(phi.jacobian(z) - Matrix2::identity())));
        }
        for frac in [0.0, 0.5] {
            for z in torus(8, frac * r_cert) {
                dev = dev.max(norm2(&(phi.jacobian(z) - Matrix2::identity())));
            }
        }
        let residual = residual * delta * delta;
        if residual < opts.tol {
            let cs = c * delta * delta;
            return Ok(MorseResult {
                delta,
                xi: [xi[0] * delta, xi[1] * delta],
                c: cs,
                s: s * delta,
                grad_residual,
                newton_iters,
                certified_radius: r_cert * delta,
                composition_residual: residual,
                dphi_deviation: dev,
                degree,
                phi,
                psi,
            });
        }
        let stalled = matches!(last, Some((prev, _)) if residual > 0.5 * prev);
        if stalled || degree + 2 > opts.max_degree {
            return Err(Error::NormalFormStall { residual, degree });
        }
        last = Some((residual, degree));
        degree += 2;
    }
}
