//! The regular piece of the curve inside `T_ν(0)`: for each `k2 = y` the
//! unique `k1 = η(y)` with `(N_0 + D_{0,0})(η, y) = 0`, found by Newton's
//! method on `F = (N_0 + D_{0,0})/z_{ν,0}`.

use num_complex::Complex64 as C;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{beta2_10, default_split};
use crate::error::{Error, Result};
use crate::fourier::Model;
use crate::freecurve::{sign, theta, w_coord, z_coord, KPoint, I};
use crate::lattice::DualPoint;
use crate::reduction::Reducer;

/// One solved point `(η(y), y)` of the sheet.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SheetPoint {
    pub y: C,
    pub eta: C,
    pub nu: u8,
    /// `|F(η, y)|` by the series path.
    pub residual: f64,
    pub newton_iters: usize,
    /// `|F|` after each Newton step (oracle path).
    pub newton_log: Vec<f64>,
    /// `∂F/∂k1` at the solution.
    pub dfdk1: C,
    /// `r(y) = −η − β₂⁽¹'⁰⁾ − i(−1)^ν y`.
    pub r: C,
    /// `σ_min(H_k)/σ_max(H_k)` on the window, when requested.
    pub kernel_ratio: Option<f64>,
}

impl SheetPoint {
    pub fn k(&self) -> KPoint {
        KPoint::new(self.eta, self.y)
    }

    /// `η(y) + i(−1)^ν y`, the distance from the free line.
    pub fn free_offset(&self) -> C {
        self.eta + I * sign(self.nu) * self.y
    }
}

/// Per-sample outcome of [`trace_sheet`].
#[derive(Clone, Debug, PartialEq)]
pub enum SampleOutcome {
    Solved(SheetPoint),
    /// `y` outside the admissible set; the reason names the violated condition.
    Skipped {
        y: C,
        reason: String,
    },
    /// Newton failed; the last iterate is kept when one exists.
    Failed {
        y: C,
        error: Error,
        last: Option<SheetPoint>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceOptions {
    /// Residual at which Newton stops.
    pub tol: f64,
    pub max_iters: usize,
    /// Double `ρ` until `max |∂F/∂k1 − 1| < 0.1` over the solved points.
    pub auto_rho: bool,
    /// Also compute `σ_min(H_k)/σ_max(H_k)` at every solved point.
    pub kernel_check: bool,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions { tol: 1e-13, max_iters: 40, auto_rho: true, kernel_check: false }
    }
}

/// Result of tracing a list of `y` samples.
#[derive(Clone, Debug)]
pub struct SheetTrace {
    pub nu: u8,
    pub outcomes: Vec<SampleOutcome>,
    /// The `ρ` in force after auto-tuning.
    pub rho_used: f64,
    pub beta2_10: C,
    pub window_radius: f64,
}

impl SheetTrace {
    pub fn solved(&self) -> impl Iterator<Item = &SheetPoint> {
        self.outcomes.iter().filter_map(|o| match o {
            SampleOutcome::Solved(p) => Some(p),
            _ => None,
        })
    }

    pub fn failures(&self) -> impl Iterator<Item = (&C, &Error)> {
        self.outcomes.iter().filter_map(|o| match o {
            SampleOutcome::Failed { y, error, .. } => Some((y, error)),
            _ => None,
        })
    }

    /// Largest `|∂F/∂k1 − 1|` over the solved points.
    pub fn max_derivative_deviation(&self) -> f64 {
        self.solved().map(|p| (p.dfdk1 - 1.0).norm()).fold(0.0, f64::max)
    }
}

/// The nonzero `b` minimising `|y + (−1)^ν θ_ν(b)|`, with that distance.
///
/// `(−1)^ν θ_ν(b) = ½(b2 + i(−1)^ν b1)`, so the distance is `½|b − p|` with
/// `p = (−2(−1)^ν Im y, −2 Re y)`.
pub fn nearest_line_offset(model: &Model, y: C, nu: u8) -> (DualPoint, f64) {
    let lat = &model.lattice;
    let s = sign(nu);
    let p = [-2.0 * s * y.im, -2.0 * y.re];
    let mut r = 4.0 * model.params.epsilon.max(lat.lambda);
    loop {
        let best = lat
            .enumerate_ball(p, r)
            .into_iter()
            .filter(|b| !b.is_zero())
            .map(|b| (b, (y + s * theta(nu, lat.point(b))).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        if let Some(best) = best {
            return best;
        }
        r *= 2.0;
    }
}

/// Checks `y ∈ Ω₂ = {8|y| > ρ, |y + (−1)^ν θ_ν(b)| > ε for b ≠ 0}`.
pub fn admissible(model: &Model, y: C, nu: u8, rho: f64) -> std::result::Result<(), String> {
    if !(8.0 * y.norm() > rho) {
        return Err(format!("8|y| = {:.4} <= rho = {rho:.4}", 8.0 * y.norm()));
    }
    let eps = model.params.epsilon;
    let (b, dist) = nearest_line_offset(model, y, nu);
    if !(dist > eps) {
        return Err(format!("|y + (-1)^nu theta_nu(b)| = {dist:.4e} <= eps = {eps} for b = {b}"));
    }
    Ok(())
}

/// The image containment `|y + (−1)^ν θ_ν(b)| > ½(ε − ε²/(40Λ))` for all `b ≠ 0`.
pub fn image_containment(model: &Model, y: C, nu: u8) -> bool {
    let eps = model.params.epsilon;
    let lam = model.lattice.lambda;
    nearest_line_offset(model, y, nu).1 > 0.5 * (eps - eps * eps / (40.0 * lam))
}

/// `F(k) = (N_0 + D_{0,0})(k)/z_{ν,0}(k)` and `∂F/∂k1` by block elimination.
fn f_and_derivative(red: &Reducer, nu: u8, k: &KPoint) -> Result<(C, C)> {
    let (s, ds) = red.schur_oracle_with_derivatives(k, true)?;
    let ds = ds.expect("derivatives requested");
    let z = z_coord(&red.model.lattice, nu, DualPoint::ZERO, k);
    let f = s[(0, 0)] / z;
    // ∂z/∂k1 = 1
    Ok((f, (ds[0][(0, 0)] - f) / z))
}

/// `F` by the series path with the reduction's region checks.
pub fn sheet_function(red: &Reducer, nu: u8, k: &KPoint) -> Result<C> {
    let z = z_coord(&red.model.lattice, nu, DualPoint::ZERO, k);
    Ok(red.f_regular(k)? / z)
}

fn solve_one(red: &Reducer, nu: u8, y: C, beta: C, opts: &TraceOptions) -> SampleOutcome {
    let model = &red.model;
    let lat = &model.lattice;
    let eps = model.params.epsilon;
    let s = sign(nu);
    let mut k1 = -beta - I * s * y;
    let mut log = Vec::new();
    let mut last_df = C::new(1.0, 0.0);
    let point = |k1: C, df: C, log: Vec<f64>, residual: f64| SheetPoint {
        y,
        eta: k1,
        nu,
        residual,
        newton_iters: log.len(),
        newton_log: log,
        dfdk1: df,
        r: -k1 - beta - I * s * y,
        kernel_ratio: None,
    };
    for _ in 0..opts.max_iters {
        let k = KPoint::new(k1, y);
        let (f, df) = match f_and_derivative(red, nu, &k) {
            Ok(v) => v,
            Err(e) => return SampleOutcome::Failed { y, error: e, last: None },
        };
        last_df = df;
        log.push(f.norm());
        if f.norm() < opts.tol {
            break;
        }
        k1 -= f / df;
        let w = w_coord(lat, nu, DualPoint::ZERO, &KPoint::new(k1, y));
        if !(w.norm() < eps) {
            let p = point(k1, df, log, f64::NAN);
            return SampleOutcome::Failed {
                y,
                error: Error::RegionExit(format!(
                    "|w_(nu,0)| = {:.4e} >= eps after {} steps",
                    w.norm(),
                    p.newton_iters
                )),
                last: Some(p),
            };
        }
    }
    let k = KPoint::new(k1, y);
    let residual = match sheet_function(red, nu, &k) {
        Ok(f) => f.norm(),
        Err(e) => return SampleOutcome::Failed { y, error: e, last: Some(point(k1, last_df, log, f64::NAN)) },
    };
    let mut p = point(k1, last_df, log, residual);
    if !(p.newton_log.last().copied().unwrap_or(f64::INFINITY) < opts.tol) {
        let iters = p.newton_iters;
        return SampleOutcome::Failed { y, error: Error::NewtonDiverged { iters, residual }, last: Some(p) };
    }
    if opts.kernel_check {
        let (lo, hi) = red.kernel_check(&k);
        p.kernel_ratio = Some(lo / hi);
    }
    SampleOutcome::Solved(p)
}

/// Traces the sheet in `T_ν(0)` over the given `y` samples.
///
/// Samples outside `Ω₂` are skipped with the violated condition. With
/// `auto_rho`, `ρ` is doubled (and the samples re-filtered) until the
/// measured `|∂F/∂k1 − 1|` is below `0.1` at every solved point.
pub fn trace_sheet(model: &Model, ys: &[C], nu: u8, opts: &TraceOptions) -> Result<SheetTrace> {
    if nu != 1 && nu != 2 {
        return Err(Error::InvalidParameter(format!("nu = {nu} must be 1 or 2")));
    }
    let red = Reducer::for_g(model, &[DualPoint::ZERO]);
    let beta = beta2_10(&model.lattice, &model.a, default_split(model), nu);
    let solved: Vec<SampleOutcome> = ys
        .par_iter()
        .map(|&y| match admissible(model, y, nu, model.params.rho) {
            Err(reason) => SampleOutcome::Skipped { y, reason },
            Ok(()) => solve_one(&red, nu, y, beta, opts),
        })
        .collect();
    let mut rho = model.params.rho;
    let max_dev = |outs: &[SampleOutcome], rho: f64| {
        outs.iter()
            .filter_map(|o| match o {
                SampleOutcome::Solved(p) if 8.0 * p.y.norm() > rho => Some((p.dfdk1 - 1.0).norm()),
                _ => None,
            })
            .fold(0.0, f64::max)
    };
    if opts.auto_rho {
        let ymax = ys.iter().map(|y| y.norm()).fold(0.0, f64::max);
        while max_dev(&solved, rho) >= 0.1 && 8.0 * ymax > rho {
            rho *= 2.0;
        }
    }
    let outcomes = solved
        .into_iter()
        .map(|o| match o {
            SampleOutcome::Solved(p) if !(8.0 * p.y.norm() > rho) => SampleOutcome::Skipped {
                y: p.y,
                reason: format!("8|y| = {:.4} <= tuned rho = {rho:.4}", 8.0 * p.y.norm()),
            },
            o => o,
        })
        .collect();
    Ok(SheetTrace { nu, outcomes, rho_used: rho, beta2_10: beta, window_radius: red.window.radius })
}

/// Outcome of [`injectivity_probe`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InjectivityReport {
    /// Smallest `|k(y) − k(y')|` over pairs with `y ≠ y'`.
    pub min_pair_distance: f64,
    /// Indices attaining it.
    pub closest_pair: Option<(usize, usize)>,
    /// Number of pairs with distinct `y` but (numerically) equal `k`.
    pub collisions: usize,
    /// Largest `|∂F/∂k1 − 1|`.
    pub max_derivative_deviation: f64,
    /// `1/(7·3⁴)`, the explicit part of the derivative bound.
    pub derivative_bound: f64,
}

impl InjectivityReport {
    pub fn injective(&self) -> bool {
        self.collisions == 0
    }
}

/// Checks that distinct samples map to distinct points and reports the
/// derivative deviation `|∂F/∂k1 − 1|`.
pub fn injectivity_probe(points: &[SheetPoint], tol: f64) -> InjectivityReport {
    let mut min_d = f64::INFINITY;
    let mut pair = None;
    let mut collisions = 0;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if (points[i].y - points[j].y).norm() <= tol {
                continue;
            }
            let d = points[i].k().dist(&points[j].k());
            if d <= tol {
                collisions += 1;
            }
            if d < min_d {
                min_d = d;
                pair = Some((i, j));
            }
        }
    }
    InjectivityReport {
        min_pair_distance: min_d,
        closest_pair: pair,
        collisions,
        max_derivative_deviation: points.iter().map(|p| (p.dfdk1 - 1.0).norm()).fold(0.0, f64::max),
        derivative_bound: 1.0 / (7.0 * 81.0),
    }
}

/// The ray `y = t + 0.25 + 0.25i` (offset from every `θ_ν(b)` line).
pub fn ray(ts: &[f64]) -> Vec<C> {
    ts.iter().map(|t| C::new(t + 0.25, 0.25)).collect()
}
