//! Handles: the part of the curve in `T_ν(0) ∩ T_{ν'}(d)` for large `|d|`.
//!
//! Near the crossing of the two free lines the curve is
//! `{x1x2 + r(x) = 0}` in the coordinates `x1 = (N_0 + D_{00})/z1`,
//! `x2 = (N_d + D_{dd})/z2` with `r = −D_{0d}D_{d0}/(z1z2)`. The coordinate
//! map `w ↦ x` (with `w = (N_{0,ν}, N_{d,ν'})` linear in `k`) is fitted by
//! a torus DFT and inverted as a power series; the Morse normal form of
//! `x1x2 + r` then gives `f∘Φ = z1z2 + t_d` and the handle map
//! `φ_{d,ν} = k∘Φ`, whose image of `{z1z2 = −t_d}` is the curve.

use nalgebra::Matrix2;
use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::Model;
use crate::freecurve::{in_tube, k_from_wz, n_line, other, sign, theta, KPoint, I};
use crate::lattice::DualPoint;
use crate::morse::{measure_bounds, morse_solve, MorseOptions, MorseResult};
use crate::poly::{norm2, solve2, torus_grid, Poly2, PolyMap};
use crate::reduction::Reducer;
use rayon::prelude::*;

const ZERO: C = C::new(0.0, 0.0);

/// Numerical knobs for [`analyze_handle`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HandleOptions {
    /// DFT size per circle for the coordinate fit.
    pub samples: usize,
    /// Degree of the fitted coordinate map.
    pub degree: usize,
    /// Fit radius in units of `ε`.
    pub fit_radius: f64,
    /// Safety factor applied to the measured `a`, `b` before the Morse step.
    pub bound_margin: f64,
    /// Relative and absolute tolerances of the product-fit comparison.
    pub oracle_rel: f64,
    pub oracle_abs: f64,
    pub morse: MorseOptions,
}

impl Default for HandleOptions {
    fn default() -> Self {
        HandleOptions {
            samples: 16,
            degree: 12,
            fit_radius: 1.25,
            bound_margin: 1.05,
            oracle_rel: 1e-6,
            oracle_abs: 1e-12,
            morse: MorseOptions::default(),
        }
    }
}

/// Reduced quantities at one `k`: `(x1, x2, r)`.
fn xr_at(red: &Reducer, nu: u8, d: DualPoint, k: &KPoint) -> Result<(C, C, C)> {
    let lat = &red.model.lattice;
    let res = red.resolvent_unchecked(k)?;
    let m = res.reduced_matrix()?;
    let (i0, id) = (red.g_pos(DualPoint::ZERO)?, red.g_pos(d)?);
    let z1 = n_line(lat, DualPoint::ZERO, other(nu), k);
    let z2 = n_line(lat, d, nu, k);
    Ok((m[(i0, i0)] / z1, m[(id, id)] / z2, -m[(i0, id)] * m[(id, i0)] / (z1 * z2)))
}

/// The local coordinate system of one handle description `(ν, d)`.
#[derive(Clone, Debug)]
pub struct HandleChart {
    pub nu: u8,
    pub d: DualPoint,
    red: Reducer,
    /// `N_{d,ν'}(k) − N_{0,ν'}(k)`, a constant.
    z_offset: C,
    /// `w` at the point where `x = 0`.
    pub w0: [C; 2],
    /// `v ↦ x(w0 + v)`, its inverse, and `v ↦ r(w0 + v)`.
    x_of_v: PolyMap,
    v_of_x: PolyMap,
    r_of_v: Poly2,
    /// `x ↦ r(k(x))`.
    r_of_x: Poly2,
    /// Sampled `max |x − x_fit|, |r − r_fit|` inside the fit torus.
    pub fit_residual: f64,
}

impl HandleChart {
    pub fn new(model: &Model, nu: u8, d: DualPoint, opts: &HandleOptions) -> Result<Self> {
        if nu != 1 && nu != 2 {
            return Err(Error::InvalidParameter(format!("nu = {nu} must be 1 or 2")));
        }
        if d.is_zero() {
            return Err(Error::InvalidParameter("a handle needs d != 0".into()));
        }
        let red = Reducer::for_g(model, &[DualPoint::ZERO, d]);
        let lat = &model.lattice;
        let origin = KPoint::new(ZERO, ZERO);
        let z_offset = n_line(lat, d, other(nu), &origin) - n_line(lat, DualPoint::ZERO, other(nu), &origin);
        let n = opts.degree;
        let mut chart = HandleChart {
            nu,
            d,
            red,
            z_offset,
            w0: [ZERO, ZERO],
            x_of_v: PolyMap::identity(n),
            v_of_x: PolyMap::identity(n),
            r_of_v: Poly2::zero(n),
            r_of_x: Poly2::zero(n),
            fit_residual: 0.0,
        };
        let radius = opts.fit_radius * model.params.epsilon;
        // one fit about the free crossing; x = 0 is found on the fit and
        // polished with true evaluations, then the series are re-centred there
        let m = opts.samples;
        let xr = torus_grid([ZERO, ZERO], radius, m)
            .par_iter()
            .map(|w| chart.xr(&chart.k_of_w(*w)))
            .collect::<Result<Vec<_>>>()?;
        let col =
            |f: fn(&(C, C, C)) -> C| Poly2::from_torus_samples(&xr.iter().map(f).collect::<Vec<_>>(), radius, m, n);
        let fit = PolyMap([col(|t| t.0), col(|t| t.1)]);
        let r_fit = col(|t| t.2);
        let mut w0 = Self::zero_of(&fit)?;
        for _ in 0..2 {
            let (x1, x2, _) = chart.xr(&chart.k_of_w(w0))?;
            let step = solve2(&fit.jacobian(w0), [x1, x2])
                .ok_or_else(|| Error::NumericallySingular("coordinate Jacobian".into()))?;
            w0 = [w0[0] - step[0], w0[1] - step[1]];
        }
        chart.w0 = w0;
        let mut x_of_v = PolyMap([fit.0[0].shift(w0), fit.0[1].shift(w0)]);
        x_of_v.0[0].set(0, 0, ZERO);
        x_of_v.0[1].set(0, 0, ZERO);
        chart.v_of_x = x_of_v.revert().ok_or_else(|| Error::NumericallySingular("coordinate map".into()))?;
        chart.x_of_v = x_of_v;
        chart.r_of_v = r_fit.shift(w0);
        chart.r_of_x = chart.r_of_v.compose(&chart.v_of_x);
        chart.fit_residual = chart.measure_fit(0.9 * radius, 4)?;
        Ok(chart)
    }

    fn zero_of(m: &PolyMap) -> Result<[C; 2]> {
        let mut v = [ZERO, ZERO];
        for _ in 0..30 {
            let x = m.eval(v);
            let step =
                solve2(&m.jacobian(v), x).ok_or_else(|| Error::NumericallySingular("coordinate Jacobian".into()))?;
            v = [v[0] - step[0], v[1] - step[1]];
            if step[0].norm() + step[1].norm() < 1e-17 {
                break;
            }
        }
        Ok(v)
    }

    fn measure_fit(&self, radius: f64, k: usize) -> Result<f64> {
        let ang = |j: usize| C::from_polar(radius, std::f64::consts::TAU * (j as f64 + 0.37) / k as f64);
        let vs: Vec<[C; 2]> = (0..k).flat_map(|p| (0..k).map(move |q| [ang(p), ang(q)])).collect();
        let errs = vs
            .par_iter()
            .map(|v| {
                let (x1, x2, r) = self.xr(&self.k_of_w([self.w0[0] + v[0], self.w0[1] + v[1]]))?;
                let xf = self.x_of_v.eval(*v);
                Ok((x1 - xf[0]).norm().max((x2 - xf[1]).norm()).max((r - self.r_of_v.eval(*v)).norm()))
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(errs.into_iter().fold(0.0, f64::max))
    }

    pub fn reducer(&self) -> &Reducer {
        &self.red
    }

    /// `k` with `(N_{0,ν}(k), N_{d,ν'}(k)) = w`.
    pub fn k_of_w(&self, w: [C; 2]) -> KPoint {
        k_from_wz(&self.red.model.lattice, self.nu, DualPoint::ZERO, w[0], w[1] - self.z_offset)
    }

    pub fn w_of_k(&self, k: &KPoint) -> [C; 2] {
        let lat = &self.red.model.lattice;
        [n_line(lat, DualPoint::ZERO, self.nu, k), n_line(lat, self.d, other(self.nu), k)]
    }

    /// `(x1, x2, r)` at `k`, directly from the reduced matrix.
    pub fn xr(&self, k: &KPoint) -> Result<(C, C, C)> {
        xr_at(&self.red, self.nu, self.d, k)
    }

    /// The inverse coordinate map `x ↦ k(x)` (series).
    pub fn k_of_x(&self, x: [C; 2]) -> KPoint {
        let v = self.v_of_x.eval(x);
        self.k_of_w([self.w0[0] + v[0], self.w0[1] + v[1]])
    }

    /// `∂k/∂x` at `x`.
    pub fn dk_dx(&self, x: [C; 2]) -> Matrix2<C> {
        let s = sign(self.nu);
        // k1 = (w1 + w2')/2, k2 = (w1 − w2')/(2is) with w2' = w2 − offset
        let dkdw = Matrix2::new(C::new(0.5, 0.0), C::new(0.5, 0.0), 1.0 / (2.0 * I * s), -1.0 / (2.0 * I * s));
        dkdw * self.v_of_x.jacobian(x)
    }

    /// `f(x) = x1x2 + r(k(x))` with `r` from the series.
    pub fn defining_function(&self, x: [C; 2]) -> C {
        x[0] * x[1] + self.r_of_x.eval(x)
    }

    /// `f(x) = x1x2 + r(k(x))` with `r` evaluated directly at `k(x)`.
    pub fn defining_function_direct(&self, x: [C; 2]) -> Result<C> {
        let (_, _, r) = self.xr(&self.k_of_x(x))?;
        Ok(x[0] * x[1] + r)
    }
}

/// One handle description with its normal form.
#[derive(Clone, Debug)]
pub struct HandleMap {
    pub chart: HandleChart,
    pub morse: MorseResult,
    /// Measured first- and second-derivative bounds of `r` on `D_ε`.
    pub a: f64,
    pub b: f64,
    /// Sampled `max |f∘Φ − z1z2 − t_d|` with `f` evaluated directly.
    pub direct_residual: f64,
}

impl HandleMap {
    pub fn build(model: &Model, nu: u8, d: DualPoint, opts: &HandleOptions) -> Result<Self> {
        let chart = HandleChart::new(model, nu, d, opts)?;
        let delta = model.params.epsilon;
        let f = |x: [C; 2]| chart.defining_function(x);
        let mb = measure_bounds(&f, delta, &opts.morse)?;
        let ab = opts.bound_margin * mb.a.max(mb.b);
        let morse = morse_solve(&f, delta, ab, ab, &opts.morse)?;
        let r = morse.certified_radius;
        let k = 5;
        let ang = |j: usize, o: f64| C::from_polar(r, std::f64::consts::TAU * (j as f64 + o) / k as f64);
        let zs: Vec<[C; 2]> = (0..k).flat_map(|p| (0..k).map(move |q| [ang(p, 0.2), ang(q, 0.7)])).collect();
        let direct_residual = zs
            .par_iter()
            .map(|z| Ok((chart.defining_function_direct(morse.phi(*z))? - z[0] * z[1] - morse.c).norm()))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        Ok(HandleMap { chart, morse, a: mb.a, b: mb.b, direct_residual })
    }

    /// `φ_{d,ν}(z) = k(Φ(z))`.
    pub fn phi(&self, z: [C; 2]) -> KPoint {
        self.chart.k_of_x(self.morse.phi(z))
    }

    /// `Dφ_{d,ν}(z)`.
    pub fn dphi(&self, z: [C; 2]) -> Matrix2<C> {
        self.chart.dk_dx(self.morse.phi(z)) * self.morse.phi_jacobian(z)
    }

    pub fn t_d(&self) -> C {
        self.morse.c
    }
}

/// Product-fit estimate of the handle constant, independent of the series
/// inverse and the normal form.
///
/// Samples `r(k)` and `x(k)` directly on a torus in `w` about the crossing,
/// fits `r ≈ Σ_{i+j≤3} a_ij x1^i x2^j` by least squares and returns the
/// critical value of `x1x2 + (fitted r)` near 0 — for a fit that is affine
/// in `x` this is the `t` of `(x1 − s1)(x2 − s2) + t`.
pub fn product_fit_constant(chart: &HandleChart, radius: f64, k: usize) -> Result<C> {
    let basis: [(usize, usize); 10] = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3)];
    let nb = basis.len();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for p in 0..k {
        for q in 0..k {
            let ang = |j: usize| C::from_polar(radius, std::f64::consts::TAU * (j as f64 + 0.5) / k as f64);
            let w = [chart.w0[0] + ang(p), chart.w0[1] + ang(q)];
            let (x1, x2, r) = chart.xr(&chart.k_of_w(w))?;
            // scaled monomials keep the normal equations well conditioned
            let (s1, s2) = (x1 / radius, x2 / radius);
            rows.push(basis.iter().map(|&(i, j)| s1.powi(i as i32) * s2.powi(j as i32)).collect::<Vec<C>>());
            rhs.push(r);
        }
    }
    let a = nalgebra::DMatrix::from_fn(rows.len(), nb, |i, j| rows[i][j]);
    let b = nalgebra::DVector::from_vec(rhs);
    let coef = a.svd(true, true).solve(&b, 1e-14).map_err(|e| Error::NumericallySingular(e.into()))?;
    let mut fit = Poly2::zero(3);
    for (n, &(i, j)) in basis.iter().enumerate() {
        fit.set(i, j, coef[n] / radius.powi((i + j) as i32));
    }
    let mut f = fit.clone();
    f.add_to(1, 1, C::new(1.0, 0.0));
    // Newton on ∇(x1x2 + fit) from 0
    let mut x = [ZERO, ZERO];
    for _ in 0..50 {
        let g = f.gradient(x);
        let step = solve2(&f.hessian(x), g).ok_or_else(|| Error::NumericallySingular("product fit".into()))?;
        x = [x[0] - step[0], x[1] - step[1]];
        if step[0].norm() + step[1].norm() < 1e-18 {
            break;
        }
    }
    Ok(f.eval(x))
}

/// Summary of one handle, the structured output of the analyzer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HandleRecord {
    pub d: DualPoint,
    /// Critical value of `x1x2 + r`: `f∘Φ = z1z2 + t_d`.
    pub t_d: C,
    /// `t_d` from the second description `(ν = 2, −d)`.
    pub t_d_partner: C,
    /// Product-fit estimate of `t_d` and its distance to `t_d`.
    pub t_fit: C,
    pub oracle_gap: f64,
    /// Critical point `ξ` of the first description (x-coordinates).
    pub xi: [C; 2],
    /// `φ_{d,1}(0)` and `φ_{d,2}(0)`.
    pub center1: KPoint,
    pub center2: KPoint,
    /// The free crossing `(iθ_1(d), θ_1(d))` and the larger of
    /// `|φ_{d,1}(0) − crossing|` and the same for the second description.
    pub free_point: KPoint,
    pub center_offset: f64,
    /// `max ‖(½[[1,1],[−is,is]])⁻¹ Dφ_{d,1} − I‖` on samples.
    pub jac_deviation: f64,
    /// Sampled `max |φ_{d,1}(z1,z2) − φ_{d,2}(z2,z1) + d|`.
    pub symmetry_residual: f64,
    /// Measured bounds on `r` and the Morse diagnostics.
    pub a: f64,
    pub b: f64,
    pub morse_degree: usize,
    pub grad_residual: f64,
    pub composition_residual: f64,
    pub dphi_deviation: f64,
    pub fit_residual: f64,
    pub rho: f64,
    pub window_radius: f64,
}

/// A fully analysed handle: both descriptions and the record.
#[derive(Clone, Debug)]
pub struct Handle {
    pub first: HandleMap,
    pub second: HandleMap,
    pub record: HandleRecord,
}

/// `½[[1, 1], [−i(−1)^ν, i(−1)^ν]]`, the free Jacobian of `φ_{d,ν}`.
pub fn free_jacobian(nu: u8) -> Matrix2<C> {
    let s = sign(nu);
    Matrix2::new(C::new(0.5, 0.0), C::new(0.5, 0.0), -0.5 * I * s, 0.5 * I * s)
}

/// The free crossing `(iθ_ν(p), (−1)^{ν+1}θ_ν(p))` of `T_ν(0)` and
/// `T_{ν'}(p)`; the two descriptions of the handle at `d` use `p = d`
/// (`ν = 1`) and `p = −d` (`ν = 2`).
pub fn free_crossing(model: &Model, nu: u8, partner: DualPoint) -> KPoint {
    let t = theta(nu, model.lattice.point(partner));
    KPoint::new(I * t, -sign(nu) * t)
}

fn bidisc_samples(r: f64, k: usize) -> Vec<[C; 2]> {
    let mut out = vec![[ZERO, ZERO]];
    for frac in [0.5, 1.0] {
        for p in 0..k {
            for q in 0..k {
                let ang = |j: usize, o: f64| C::from_polar(frac * r, std::f64::consts::TAU * (j as f64 + o) / k as f64);
                out.push([ang(p, 0.1), ang(q, 0.3)]);
            }
        }
    }
    out
}

/// Builds both descriptions of the handle at `d` and checks them against
/// each other, the free geometry and the product-fit oracle.
///
/// Refuses `d` with `2|d| ≤ ρ`.
pub fn analyze_handle(model: &Model, d: DualPoint, opts: &HandleOptions) -> Result<Handle> {
    let rho = model.params.rho;
    let dn = model.lattice.norm(d);
    if !(2.0 * dn > rho) {
        return Err(Error::RegionViolation(format!("2|d| = {:.4} does not exceed rho = {rho:.4}", 2.0 * dn)));
    }
    let (first, second) = rayon::join(|| HandleMap::build(model, 1, d, opts), || HandleMap::build(model, 2, -d, opts));
    let (first, second) = (first?, second?);
    let eps = model.params.epsilon;
    let t_d = first.t_d();
    let t_fit = product_fit_constant(&first.chart, eps / 4.0, 8)?;
    let oracle_gap = (t_fit - t_d).norm();
    let free_point = free_crossing(model, 1, d);
    let center1 = first.phi([ZERO, ZERO]);
    let center2 = second.phi([ZERO, ZERO]);
    let jinv = free_jacobian(1).try_inverse().expect("invertible");
    let dd = model.lattice.point(d);
    let mut jac_deviation: f64 = 0.0;
    let mut symmetry_residual: f64 = 0.0;
    for z in bidisc_samples(eps / 2.0, 6) {
        jac_deviation = jac_deviation.max(norm2(&(jinv * first.dphi(z) - Matrix2::identity())));
        let k1 = first.phi(z);
        let k2 = second.phi([z[1], z[0]]);
        let dev = (k1.k1 - (k2.k1 - dd[0])).norm().max((k1.k2 - (k2.k2 - dd[1])).norm());
        symmetry_residual = symmetry_residual.max(dev);
    }
    let scale = t_d.norm().max(t_fit.norm());
    if oracle_gap > opts.oracle_abs && oracle_gap > opts.oracle_rel * scale {
        return Err(Error::OracleMismatch { morse: format!("{t_d}"), fit: format!("{t_fit}") });
    }
    let record = HandleRecord {
        d,
        t_d,
        t_d_partner: second.t_d(),
        t_fit,
        oracle_gap,
        xi: first.morse.xi,
        center1,
        center2,
        free_point,
        center_offset: center1.dist(&free_point).max(center2.dist(&free_crossing(model, 2, -d))),
        jac_deviation,
        symmetry_residual,
        a: first.a,
        b: first.b,
        morse_degree: first.morse.degree,
        grad_residual: first.morse.grad_residual,
        composition_residual: first.morse.composition_residual.max(first.direct_residual),
        dphi_deviation: first.morse.dphi_deviation,
        fit_residual: first.chart.fit_residual,
        rho,
        window_radius: first.chart.reducer().window.radius,
    };
    Ok(Handle { first, second, record })
}

/// Points of `{z1z2 = −t_d, |z_i| ≤ ε/2}` mapped to `k`-space by `φ_{d,1}`.
///
/// The samples run over `n_radii` moduli of `z1` (spread geometrically over
/// the admissible range) times `n_angles` arguments.
pub fn handle_curve_points(h: &HandleMap, epsilon: f64, n_radii: usize, n_angles: usize) -> Vec<KPoint> {
    let half = epsilon / 2.0;
    let t = -h.t_d();
    let lo = (t.norm() / half).max(1e-3 * half);
    let mut out = Vec::with_capacity(n_radii * n_angles);
    for i in 0..n_radii {
        let frac = if n_radii == 1 { 0.5 } else { i as f64 / (n_radii - 1) as f64 };
        let m = lo * (half / lo).powf(frac) * (1.0 - 1e-9);
        for j in 0..n_angles {
            let z1 = C::from_polar(m, std::f64::consts::TAU * (j as f64 + 0.25) / n_angles as f64);
            let z2 = if t == ZERO { ZERO } else { t / z1 };
            if z2.norm() <= half {
                out.push(h.phi([z1, z2]));
            }
            if t == ZERO {
                out.push(h.phi([ZERO, z1]));
            }
        }
    }
    out
}

/// `σ_min(H_k)/σ_max(H_k)` at each point, and whether it lies in both tubes.
pub fn check_curve_points(h: &HandleMap, pts: &[KPoint]) -> Vec<(f64, bool)> {
    let red = h.chart.reducer();
    let lat = &red.model.lattice;
    let eps = red.model.params.epsilon;
    pts.iter()
        .map(|k| {
            let (lo, hi) = red.kernel_check(k);
            let inside =
                in_tube(lat, DualPoint::ZERO, h.chart.nu, k, eps) && in_tube(lat, h.chart.d, other(h.chart.nu), k, eps);
            (lo / hi, inside)
        })
        .collect()
}
