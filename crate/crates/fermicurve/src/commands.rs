//! The five commands behind the `fermi` binary: `freecurve`, `trace`,
//! `handles`, `verify` and `spectrum`.
//!
//! Every command writes its files into the run's output directory, returns
//! a [`Report`] listing the files and the failed checks, and always writes
//! `<command>_failures.csv` (header-only when nothing failed). The exit
//! status is [`EXIT_OK`] when every gated check holds, [`EXIT_FAILED`]
//! otherwise; input errors map to [`EXIT_INPUT`] and a refused run (the
//! magnetic smallness condition fails) to [`EXIT_REFUSED`].

use std::path::PathBuf;

use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::asymptotics::{
    alpha1, alpha_split, beta2_10, cts_constants, default_split, fd_derivative_check, x_coords_fast, xy_bounds,
    xy_matrices, SplitWindows,
};
use crate::config::Run;
use crate::error::{Error, Result};
use crate::fourier::{Model, ScalarField};
use crate::freecurve::{line_intersection, order_relations, other, sign, theta, w_coord, KPoint, I};
use crate::handle::{analyze_handle, check_curve_points, handle_curve_points, HandleOptions};
use crate::lattice::DualPoint;
use crate::operator::{
    bd1_triple, decay_certificate, hk_matrix, r_matrix, schur_norm, sigma_max, tail_budget, CMat, IndexWindow,
    NEUMANN_LIMIT,
};
use crate::output::{cnum, num, write_handle_record, Header, Table};
use crate::reduction::Reducer;
use crate::sheet::{trace_sheet, SampleOutcome, TraceOptions};

pub const EXIT_OK: i32 = 0;
/// Some gated check failed; see the failure list.
pub const EXIT_FAILED: i32 = 1;
/// The configuration or an input file was rejected.
pub const EXIT_INPUT: i32 = 2;
/// The run was refused because the model fails the smallness condition.
pub const EXIT_REFUSED: i32 = 3;

/// Kernel tolerance: `σ_min(H_k) < KERNEL_TOL · σ_max(H_k)` marks a curve point.
pub const KERNEL_TOL: f64 = 1e-7;
/// Largest accepted handle symmetry residual.
pub const SYMMETRY_TOL: f64 = 1e-8;

/// Exit status for an error returned by a command.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::SmallnessViolated { .. } => EXIT_REFUSED,
        _ => EXIT_INPUT,
    }
}

/// One failed check.
#[derive(Clone, Debug, PartialEq)]
pub struct Failure {
    /// What was checked (a sample, a handle, a bound).
    pub item: String,
    pub check: String,
    pub measured: f64,
    pub limit: f64,
    pub detail: String,
}

impl Failure {
    fn new(item: impl Into<String>, check: &str, measured: f64, limit: f64, detail: impl Into<String>) -> Self {
        Failure { item: item.into(), check: check.to_string(), measured, limit, detail: detail.into() }
    }

    fn error(item: impl Into<String>, e: &Error) -> Self {
        Failure::new(item, "evaluation", f64::NAN, f64::NAN, e.to_string())
    }
}

/// What a command produced.
#[derive(Clone, Debug, Default)]
pub struct Report {
    pub command: String,
    pub files: Vec<PathBuf>,
    pub failures: Vec<Failure>,
    /// Short `(key, value)` facts for the terminal.
    pub summary: Vec<(String, String)>,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() {
            EXIT_OK
        } else {
            EXIT_FAILED
        }
    }

    fn note(&mut self, key: &str, value: impl ToString) {
        self.summary.push((key.to_string(), value.to_string()));
    }
}

/// Runs `f` on a pool with the given number of threads (rayon's default
/// when `None`).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n);
    }
    let pool = b.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn header(run: &Run, command: &str, window_radius: f64, tail: f64, rho: f64) -> Header {
    Header {
        command: command.to_string(),
        config_hash: run.hash(),
        window_radius,
        tail_budget: tail,
        epsilon: run.model.params.epsilon,
        rho,
    }
}

fn finish(run: &Run, mut report: Report, hdr: &Header) -> Result<Report> {
    let mut t = Table::new(&["item", "check", "measured", "limit", "detail"]);
    for f in &report.failures {
        t.push(vec![f.item.clone(), f.check.clone(), num(f.measured), num(f.limit), f.detail.clone()]);
    }
    report.files.push(t.write(&run.out.join(format!("{}_failures.csv", report.command)), hdr)?);
    report.note("failures", report.failures.len());
    Ok(report)
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![0.5 * (a + b)],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

fn dp(d: [i64; 2]) -> DualPoint {
    DualPoint(d[0], d[1])
}

// ---------------------------------------------------------------- freecurve

/// The free curve on the real slice `k1 ∈ iℝ`, `k2 ∈ ℝ`.
///
/// On this slice `N_ν(b)` vanishes only when the first coordinate of `b`
/// is zero, and then along the line `Im k1 = −(−1)^ν (k2 + b_2)`. Writes the
/// sampled point cloud, the list of lines, and the pairwise intersections
/// `N_1(b) ∩ N_2(c)` whose `k2` lies in the requested range.
pub fn cmd_freecurve(run: &Run) -> Result<Report> {
    let cfg = &run.config.freecurve;
    let lat = &run.model.lattice;
    let mut report = Report { command: "freecurve".into(), ..Default::default() };
    let hdr = header(run, "freecurve", cfg.window_radius, 0.0, run.model.params.rho);
    let dual = if cfg.window_radius >= 0.0 { lat.enumerate_dual(cfg.window_radius) } else { vec![] };
    let on_slice: Vec<DualPoint> = dual
        .into_iter()
        .filter(|b| {
            let p = lat.point(*b);
            p[0].abs() <= 1e-12 * (1.0 + p[1].abs())
        })
        .collect();

    let mut lines = Table::new(&["nu", "b1", "b2", "slope", "intercept"]);
    let mut points = Table::new(&["nu", "b1", "b2", "k2", "im_k1"]);
    let k2s = linspace(cfg.k2_min, cfg.k2_max, cfg.samples);
    for nu in [1u8, 2] {
        let s = sign(nu);
        for &b in &on_slice {
            let p1 = lat.point(b)[1];
            let ids = [nu.to_string(), b.0.to_string(), b.1.to_string()];
            lines.push([ids.to_vec(), vec![num(-s), num(-s * p1)]].concat());
            for &k2 in &k2s {
                points.push([ids.to_vec(), vec![num(k2), num(-s * (k2 + p1))]].concat());
            }
        }
    }

    let mut inter = Table::new(&["b1", "b2", "c1", "c2", "k1_re", "k1_im", "k2_re", "k2_im", "theta_re", "theta_im"]);
    for &b in &on_slice {
        for &c in &on_slice {
            let k = line_intersection(lat, b, c);
            if k.k2.re < cfg.k2_min || k.k2.re > cfg.k2_max {
                continue;
            }
            let th = theta(1, lat.point(c - b));
            let mut row = vec![b.0.to_string(), b.1.to_string(), c.0.to_string(), c.1.to_string()];
            row.extend(cnum(k.k1));
            row.extend(cnum(k.k2));
            row.extend(cnum(th));
            inter.push(row);
        }
    }
    report.note("lines", lines.len());
    report.note("intersections", inter.len());
    report.files.push(lines.write(&run.out.join("freecurve_lines.csv"), &hdr)?);
    report.files.push(points.write(&run.out.join("freecurve_points.csv"), &hdr)?);
    report.files.push(inter.write(&run.out.join("freecurve_intersections.csv"), &hdr)?);
    finish(run, report, &hdr)
}

// -------------------------------------------------------------------- trace

/// Traces the regular sheet along `y = t + offset`, `t ∈ [t_min, t_max]`.
///
/// Gated checks per solved point: the residual, `|η + i(−1)^ν y| < ε²/(40Λ)`,
/// and (with `kernel_check`) `σ_min(H_k) < 10⁻⁷ σ_max(H_k)`; globally
/// `|β₂⁽¹'⁰⁾| < ε²/(100Λ)`. Newton failures are failures too. The bound
/// report also lists `|r(y)|` against `ε³/(50Λ²) + C/ρ`, with `C` fitted
/// from the data (the report is informational since `C` is not explicit).
pub fn cmd_trace(run: &Run) -> Result<Report> {
    let cfg = &run.config.trace;
    let model = &run.model;
    let lam = model.lattice.lambda;
    let eps = model.params.epsilon;
    let ys: Vec<C> = linspace(cfg.t_min, cfg.t_max, cfg.samples)
        .into_iter()
        .map(|t| C::new(t + cfg.offset[0], cfg.offset[1]))
        .collect();
    let opts =
        TraceOptions { tol: cfg.tol, max_iters: cfg.max_iters, auto_rho: cfg.auto_rho, kernel_check: cfg.kernel_check };
    let trace = trace_sheet(model, &ys, cfg.nu, &opts)?;
    let red = Reducer::for_g(model, &[DualPoint::ZERO]);
    let tail = trace.solved().map(|p| red.tail_budget(&p.k())).fold(0.0, f64::max);
    let hdr = header(run, "trace", trace.window_radius, tail, trace.rho_used);
    let mut report = Report { command: "trace".into(), ..Default::default() };

    let offset_bound = eps * eps / (40.0 * lam);
    let beta_bound = eps * eps / (100.0 * lam);
    let r_explicit = eps.powi(3) / (50.0 * lam * lam);
    let beta = trace.beta2_10.norm();
    if !(beta < beta_bound) {
        report.failures.push(Failure::new("global", "beta2_10", beta, beta_bound, format!("nu = {}", cfg.nu)));
    }
    let c_fit = trace.solved().map(|p| (p.r.norm() - r_explicit).max(0.0) * trace.rho_used).fold(0.0, f64::max);

    let mut sheet = Table::new(&["y_re", "y_im", "eta_re", "eta_im", "residual"]);
    let mut bounds = Table::new(&[
        "y_re",
        "y_im",
        "abs_r",
        "r_explicit",
        "r_fitted_bound",
        "abs_free_offset",
        "free_offset_bound",
        "abs_beta2_10",
        "beta2_10_bound",
        "kernel_ratio",
    ]);
    let mut skipped = Table::new(&["y_re", "y_im", "reason"]);
    for o in &trace.outcomes {
        match o {
            SampleOutcome::Solved(p) => {
                let item = format!("y = {}", p.y);
                let mut row = cnum(p.y).to_vec();
                row.extend(cnum(p.eta));
                row.push(num(p.residual));
                sheet.push(row);
                let off = p.free_offset().norm();
                let kr = p.kernel_ratio.unwrap_or(f64::NAN);
                let mut b = cnum(p.y).to_vec();
                b.extend([
                    num(p.r.norm()),
                    num(r_explicit),
                    num(r_explicit + c_fit / trace.rho_used),
                    num(off),
                    num(offset_bound),
                    num(beta),
                    num(beta_bound),
                    num(kr),
                ]);
                bounds.push(b);
                if !(p.residual <= cfg.residual_limit) {
                    report.failures.push(Failure::new(&item, "residual", p.residual, cfg.residual_limit, ""));
                }
                if !(off < offset_bound) {
                    report.failures.push(Failure::new(&item, "free_offset", off, offset_bound, ""));
                }
                if let Some(kr) = p.kernel_ratio {
                    if !(kr < KERNEL_TOL) {
                        report.failures.push(Failure::new(&item, "kernel", kr, KERNEL_TOL, ""));
                    }
                }
            }
            SampleOutcome::Skipped { y, reason } => {
                let mut row = cnum(*y).to_vec();
                row.push(reason.clone());
                skipped.push(row);
            }
            SampleOutcome::Failed { y, error, .. } => {
                report.failures.push(Failure::error(format!("y = {y}"), error));
            }
        }
    }
    report.note("solved", sheet.len());
    report.note("skipped", skipped.len());
    report.note("rho_used", num(trace.rho_used));
    report.note("r_fitted_c", num(c_fit));
    report.files.push(sheet.write(&run.out.join("trace_sheet.csv"), &hdr)?);
    report.files.push(bounds.write(&run.out.join("trace_bounds.csv"), &hdr)?);
    report.files.push(skipped.write(&run.out.join("trace_skipped.csv"), &hdr)?);
    finish(run, report, &hdr)
}

// ------------------------------------------------------------------ handles

/// Analyses the handle at every configured `d`.
///
/// Writes one TOML document per handle and a summary table. A `d` with
/// `2|d| ≤ ρ` is skipped with reason "below rho". Gated checks: the
/// analysis succeeds (which includes the product-fit oracle), the symmetry
/// residual is below `10⁻⁸`, and every sampled curve point lies in both
/// tubes with `σ_min(H_k) < 10⁻⁷ σ_max(H_k)`.
pub fn cmd_handles(run: &Run) -> Result<Report> {
    let cfg = &run.config.handles;
    let model = &run.model;
    let eps = model.params.epsilon;
    let rho = model.params.rho;
    let mut report = Report { command: "handles".into(), ..Default::default() };
    let opts = HandleOptions::default();
    type Outcome = std::result::Result<(crate::handle::HandleRecord, f64, usize, f64), Error>;
    let results: Vec<(DualPoint, Option<Outcome>)> = cfg
        .d
        .par_iter()
        .map(|&d| {
            let d = dp(d);
            if !(2.0 * model.lattice.norm(d) > rho) {
                return (d, None);
            }
            let out = analyze_handle(model, d, &opts).map(|h| {
                let pts = handle_curve_points(&h.first, eps, cfg.curve_radii, cfg.curve_angles);
                let checks = check_curve_points(&h.first, &pts);
                let worst = checks.iter().map(|c| if c.1 { c.0 } else { f64::INFINITY }).fold(0.0, f64::max);
                let red = Reducer::for_g(model, &[DualPoint::ZERO, d]);
                let tail = red.tail_budget(&h.record.center1);
                (h.record, worst, checks.len(), tail)
            });
            (d, Some(out))
        })
        .collect();

    let tail =
        results.iter().filter_map(|(_, o)| o.as_ref().and_then(|r| r.as_ref().ok()).map(|r| r.3)).fold(0.0, f64::max);
    let radius = results
        .iter()
        .filter_map(|(_, o)| o.as_ref().and_then(|r| r.as_ref().ok()).map(|r| r.0.window_radius))
        .fold(model.params.window_radius, f64::max);
    let hdr = header(run, "handles", radius, tail, rho);
    let mut summary = Table::new(&[
        "d1",
        "d2",
        "abs_d",
        "abs_t_d",
        "t_d_times_d4",
        "oracle_gap",
        "symmetry_residual",
        "center_offset",
        "center_explicit",
        "curve_points",
        "curve_kernel_max",
        "status",
    ]);
    for (d, outcome) in results {
        let dn = model.lattice.norm(d);
        let item = format!("d = {d}");
        let ids = vec![d.0.to_string(), d.1.to_string(), num(dn)];
        let blank = |status: &str| {
            let mut row = ids.clone();
            row.extend(std::iter::repeat_n(String::new(), 8));
            row.push(status.to_string());
            row
        };
        match outcome {
            None => summary.push(blank("below rho")),
            Some(Err(e)) => {
                summary.push(blank("failed"));
                report.failures.push(Failure::error(&item, &e));
            }
            Some(Ok((rec, worst, n_pts, _))) => {
                let path = run.out.join(format!("handle_{}_{}.toml", d.0, d.1));
                let hh = header(run, "handles", rec.window_radius, tail, rho);
                report.files.push(write_handle_record(&path, &hh, &rec)?);
                let ok_sym = rec.symmetry_residual < SYMMETRY_TOL;
                let ok_curve = worst < KERNEL_TOL;
                if !ok_sym {
                    report.failures.push(Failure::new(&item, "symmetry", rec.symmetry_residual, SYMMETRY_TOL, ""));
                }
                if !ok_curve {
                    report.failures.push(Failure::new(&item, "curve_kernel", worst, KERNEL_TOL, ""));
                }
                let mut row = ids.clone();
                row.extend([
                    num(rec.t_d.norm()),
                    num(rec.t_d.norm() * dn.powi(4)),
                    num(rec.oracle_gap),
                    num(rec.symmetry_residual),
                    num(rec.center_offset),
                    num(eps / 900.0),
                    n_pts.to_string(),
                    num(worst),
                    if ok_sym && ok_curve { "ok" } else { "failed" }.to_string(),
                ]);
                summary.push(row);
            }
        }
    }
    report.note("handles", summary.len());
    report.files.push(summary.write(&run.out.join("handles_summary.csv"), &hdr)?);
    finish(run, report, &hdr)
}

// ------------------------------------------------------------------- verify

/// One measured quantity against its certified bound.
#[derive(Clone, Debug, PartialEq)]
pub struct Measurement {
    pub bound: &'static str,
    pub measured: f64,
    pub certified: f64,
    /// Strict inequality required.
    pub strict: bool,
}

impl Measurement {
    fn le(bound: &'static str, measured: f64, certified: f64) -> Self {
        Measurement { bound, measured, certified, strict: false }
    }

    fn lt(bound: &'static str, measured: f64, certified: f64) -> Self {
        Measurement { bound, measured, certified, strict: true }
    }

    pub fn holds(&self) -> bool {
        if self.strict {
            self.measured < self.certified
        } else {
            self.measured <= self.certified
        }
    }

    fn ratio(&self) -> f64 {
        if self.certified > 0.0 {
            self.measured / self.certified
        } else if self.measured <= 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// All measurements at one sample point.
#[derive(Clone, Debug, Default)]
struct Sample {
    region: String,
    label: String,
    rows: Vec<Measurement>,
    errors: Vec<Error>,
    tail: f64,
}

/// `f = q̂` and an asymmetric `g` for the `α` bounds.
fn alpha_test_fields(model: &Model) -> (ScalarField, ScalarField) {
    let lat = &model.lattice;
    let g = model.q.map(|b, x| x * C::new(1.0 + 0.5 * lat.point(b)[0], 0.3 * lat.point(b)[1]));
    (model.q.clone(), g)
}

fn certificate_rows(red: &Reducer, k: &KPoint, out: &mut Sample) -> Result<()> {
    let model = &red.model;
    let lat = &model.lattice;
    let eps = model.params.epsilon;
    let res = red.resolvent(k)?;
    let cert = res.certificate()?;
    out.rows.push(Measurement::lt("rss_limit", cert.rss_bound, NEUMANN_LIMIT));
    out.rows.push(Measurement::le("r_minus_i", cert.r_minus_i, cert.rss_bound));
    out.rows.push(Measurement::le("rinv_minus_i", cert.rinv_minus_i, cert.inverse_bound));
    let gp = &red.window.gprime;
    let floor = gp.iter().map(|b| crate::freecurve::n_full(lat, *b, k).norm()).fold(f64::INFINITY, f64::min);
    out.rows.push(Measurement::le("gprime_floor", eps * k.v_norm(), floor));
    for (name, (m, b)) in ["bd1_q", "bd1_a_grad", "bd1_k_a"].into_iter().zip(bd1_triple(model, gp, gp, k)?) {
        out.rows.push(Measurement::le(name, m, b));
    }
    let r = r_matrix(model, gp, gp, k)?;
    let n = r.rows.len();
    let tm = &r.entries - CMat::identity(n, n);
    let mut power = tm.clone();
    for (m, name) in [(1u32, "decay_m1"), (2, "decay_m2"), (3, "decay_m3")] {
        let mut worst: f64 = 0.0;
        for (i, b) in r.rows.iter().enumerate() {
            for (j, c) in r.cols.iter().enumerate() {
                worst = worst.max((1.0 + lat.norm(*b - *c).powi(2)) * power[(i, j)].norm());
            }
        }
        out.rows.push(Measurement::le(name, worst, decay_certificate(m, 2.0, lat)));
        power = &power * &tm;
    }
    out.tail = out.tail.max(red.tail_budget(k));
    Ok(())
}

fn order_rows(report: &crate::freecurve::OrderReport, out: &mut Sample) {
    let lower = report.checks.iter().map(|(_, lo, mid, _)| lo / mid).fold(0.0, f64::max);
    let upper = report.checks.iter().map(|(_, _, mid, hi)| mid / hi).fold(0.0, f64::max);
    out.rows.push(Measurement::le("order_lower", lower, 1.0));
    out.rows.push(Measurement::le("order_upper", upper, 1.0));
}

fn regular_sample(model: &Model, nu: u8, k: &KPoint, derivatives: bool) -> Sample {
    let mut out =
        Sample { region: format!("regular_nu{nu}"), label: format!("k = ({}, {})", k.k1, k.k2), ..Default::default() };
    let red = Reducer::for_g(model, &[DualPoint::ZERO]);
    let run = |out: &mut Sample| -> Result<()> {
        let lat = &model.lattice;
        let lam = lat.lambda;
        certificate_rows(&red, k, out)?;
        match order_relations(lat, k, nu, None) {
            Ok(r) => order_rows(&r, out),
            Err(e) => out.errors.push(e),
        }
        let sp = SplitWindows::for_reducer(&red, nu, DualPoint::ZERO)?;
        let xy = xy_matrices(model, &sp, k)?;
        let (xb, yb) = xy_bounds(model, &sp, k);
        out.rows.push(Measurement::le("x_norm", schur_norm(&xy.x), xb));
        out.rows.push(Measurement::lt("x_bound", xb, 1.0 / 3.0));
        out.rows.push(Measurement::le("y_norm", schur_norm(&xy.y), yb));
        out.rows.push(Measurement::lt("y_bound", yb, 1.0 / 14.0));
        let (f, g) = alpha_test_fields(model);
        let l1 = |h: &ScalarField| h.iter().map(|(_, x)| x.norm()).sum::<f64>();
        let cts = cts_constants(lat, &model.a, nu, model.params.epsilon, l1(&f), l1(&g));
        let res = red.resolvent(k)?;
        let p = alpha_split(&res, &sp, &|b| f.get(b), &|b| g.get(b), 1e-15)?;
        out.rows.push(Measurement::le("alpha10", p.a10.norm(), cts[0]));
        out.rows.push(Measurement::le("alpha11", p.a11.norm(), cts[1]));
        out.rows.push(Measurement::le("alpha12", p.a12.norm(), cts[2]));
        if derivatives {
            let fg = l1(&f) * l1(&g);
            let zr = sp.z_r(lat, k);
            let target = |kk: &KPoint| alpha1(model, &sp, kk, &|b| f.get(b), &|b| g.get(b));
            for (n, m, c, name) in [
                (1, 0, 13.0 / lam.powi(2), "alpha1_d10"),
                (0, 1, 13.0 / lam.powi(2), "alpha1_d01"),
                (1, 1, 65.0 / lam.powi(3), "alpha1_d11"),
            ] {
                let step = if n + m == 1 { 1e-3 } else { 1e-2 };
                let rep = fd_derivative_check(&target, k, n, m, step)?;
                out.rows.push(Measurement::le(name, rep.value.norm(), c * fg / zr));
            }
        }
        Ok(())
    };
    if let Err(e) = run(&mut out) {
        out.errors.push(e);
    }
    out
}

fn handle_sample(model: &Model, d: DualPoint, k: &KPoint) -> Sample {
    let mut out =
        Sample { region: format!("handle_d={d}"), label: format!("k = ({}, {})", k.k1, k.k2), ..Default::default() };
    let red = Reducer::for_g(model, &[DualPoint::ZERO, d]);
    let run = |out: &mut Sample| -> Result<()> {
        let lat = &model.lattice;
        certificate_rows(&red, k, out)?;
        match order_relations(lat, k, 1, Some(d)) {
            Ok(r) => order_rows(&r, out),
            Err(e) => out.errors.push(e),
        }
        let res = red.resolvent(k)?;
        let (x1, x2) = x_coords_fast(&res, 1, d)?;
        let w1 = w_coord(lat, 1, DualPoint::ZERO, k);
        let w2 = w_coord(lat, other(1), d, k);
        let dev = (x1 - w1).norm().max((x2 - w2).norm());
        out.rows.push(Measurement::lt("x_minus_w", dev, model.params.epsilon / 8.0));
        Ok(())
    };
    if let Err(e) = run(&mut out) {
        out.errors.push(e);
    }
    out
}

/// Draws `n` points of `T_ν(0)` with `|v|` in the configured range, off every
/// other tube.
fn draw_regular(model: &Model, rng: &mut ChaCha8Rng, nu: u8, n: usize, v_lo: f64, v_hi: f64) -> Vec<KPoint> {
    let red = Reducer::for_g(model, &[DualPoint::ZERO]);
    let eps = model.params.epsilon;
    let s = sign(nu);
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0;
    while out.len() < n && attempts < 50 * n.max(1) {
        attempts += 1;
        let y = C::new(rng.random_range(v_lo..v_hi), rng.random_range(-0.5..0.5));
        let w = C::from_polar(0.5 * eps * rng.random::<f64>().sqrt(), rng.random_range(0.0..std::f64::consts::TAU));
        let k = KPoint::new(-I * s * y + w, y);
        if red.check_region(&k).is_ok() {
            out.push(k);
        }
    }
    out
}

fn draw_handle(model: &Model, rng: &mut ChaCha8Rng, d: DualPoint, n: usize) -> Vec<KPoint> {
    let red = Reducer::for_g(model, &[DualPoint::ZERO, d]);
    let eps = model.params.epsilon;
    let centre = line_intersection(&model.lattice, DualPoint::ZERO, d);
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0;
    while out.len() < n && attempts < 50 * n.max(1) {
        attempts += 1;
        let mut dk = [C::new(0.0, 0.0); 2];
        for x in dk.iter_mut() {
            *x = C::from_polar(0.25 * eps * rng.random::<f64>().sqrt(), rng.random_range(0.0..std::f64::consts::TAU));
        }
        let k = centre.add(dk);
        if crate::asymptotics::check_handle_region(&red, 1, &k).is_ok() {
            out.push(k);
        }
    }
    out
}

/// Samples seen, worst measurement, its sample label, and whether all held.
type BoundGroup = (usize, Measurement, String, bool);

/// Checks every certified bound against its measurement on random samples.
///
/// Refuses with `SmallnessViolated` when the magnetic smallness condition
/// fails. Writes one row per (bound, region) with the worst sample's
/// measurement, the certified value and the margin.
pub fn cmd_verify(run: &Run) -> Result<Report> {
    let cfg = &run.config.verify;
    let model = &run.model;
    let sm = model.smallness();
    if !sm.pass {
        return Err(Error::SmallnessViolated { weighted: sm.weighted_norm, limit: sm.limit });
    }
    let lat = &model.lattice;
    let lam = lat.lambda;
    let eps = model.params.epsilon;
    let v_lo = cfg.v_min.max(model.params.radius_r + 1.0);
    let v_hi = cfg.v_max.max(v_lo + 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(run.config.seed);
    let mut jobs: Vec<(u8, KPoint, bool)> = Vec::new();
    for nu in [1u8, 2] {
        for (i, k) in draw_regular(model, &mut rng, nu, cfg.samples, v_lo, v_hi).into_iter().enumerate() {
            jobs.push((nu, k, i % cfg.derivative_stride == 0));
        }
    }
    let mut handle_jobs: Vec<(DualPoint, KPoint)> = Vec::new();
    for &d in &cfg.handle_d {
        let d = dp(d);
        if 2.0 * lat.norm(d) > model.params.rho {
            handle_jobs.extend(draw_handle(model, &mut rng, d, cfg.samples).into_iter().map(|k| (d, k)));
        }
    }

    let mut samples: Vec<Sample> = jobs.par_iter().map(|(nu, k, der)| regular_sample(model, *nu, k, *der)).collect();
    samples.extend(handle_jobs.par_iter().map(|(d, k)| handle_sample(model, *d, k)).collect::<Vec<_>>());

    // the sheet through the regular samples
    for nu in [1u8, 2] {
        let ys: Vec<C> = jobs.iter().filter(|j| j.0 == nu).map(|j| j.1.k2).collect();
        let trace = trace_sheet(model, &ys, nu, &TraceOptions::default())?;
        for o in &trace.outcomes {
            let mut s = Sample { region: format!("regular_nu{nu}"), ..Default::default() };
            match o {
                SampleOutcome::Solved(p) => {
                    s.label = format!("y = {}", p.y);
                    s.rows.push(Measurement::lt("sheet_offset", p.free_offset().norm(), eps * eps / (40.0 * lam)));
                }
                SampleOutcome::Failed { y, error, .. } => {
                    s.label = format!("y = {y}");
                    s.errors.push(error.clone());
                }
                SampleOutcome::Skipped { .. } => continue,
            }
            samples.push(s);
        }
        let mut g = Sample { region: "global".into(), label: format!("nu = {nu}"), ..Default::default() };
        g.rows.push(Measurement::lt(
            "beta2_10",
            beta2_10(lat, &model.a, default_split(model), nu).norm(),
            eps * eps / (100.0 * lam),
        ));
        samples.push(g);
    }
    let mut g = Sample { region: "global".into(), label: "model".into(), ..Default::default() };
    g.rows.push(Measurement::lt("smallness", sm.weighted_norm, sm.limit));
    samples.push(g);

    let tail = samples.iter().map(|s| s.tail).fold(0.0, f64::max);
    let hdr = header(run, "verify", model.params.window_radius, tail, model.params.rho);
    let mut report = Report { command: "verify".into(), ..Default::default() };

    // (bound, region) → (count, worst measurement, its label, all hold)
    let mut groups: Vec<((String, &'static str), BoundGroup)> = Vec::new();
    for s in &samples {
        for e in &s.errors {
            report.failures.push(Failure::error(format!("{} {}", s.region, s.label), e));
        }
        for m in &s.rows {
            if !m.holds() {
                report.failures.push(Failure::new(
                    format!("{} {}", s.region, s.label),
                    m.bound,
                    m.measured,
                    m.certified,
                    "",
                ));
            }
            let key = (s.region.clone(), m.bound);
            match groups.iter_mut().find(|(k, _)| *k == key) {
                Some((_, g)) => {
                    g.0 += 1;
                    g.3 &= m.holds();
                    if m.ratio() > g.1.ratio() {
                        g.1 = m.clone();
                        g.2 = s.label.clone();
                    }
                }
                None => groups.push((key, (1, m.clone(), s.label.clone(), m.holds()))),
            }
        }
    }
    let mut table =
        Table::new(&["bound", "region", "samples", "measured", "certified", "margin", "ratio", "pass", "worst_sample"]);
    for ((region, bound), (count, m, label, all)) in &groups {
        table.push(vec![
            bound.to_string(),
            region.clone(),
            count.to_string(),
            num(m.measured),
            num(m.certified),
            num(m.certified - m.measured),
            num(m.ratio()),
            all.to_string(),
            label.clone(),
        ]);
    }
    report.note("rows", table.len());
    report.note("regular_samples", jobs.len());
    report.note("handle_samples", handle_jobs.len());
    report.files.push(table.write(&run.out.join("verify_bounds.csv"), &hdr)?);
    finish(run, report, &hdr)
}

// ----------------------------------------------------------------- spectrum

/// Eigenvalues of `H_k` truncated to the ball `|b| ≤ radius`.
pub fn spectrum(model: &Model, k: &KPoint, radius: f64) -> (Vec<C>, f64) {
    let pts = IndexWindow::ball(&model.lattice, radius, &[]).all_points;
    let h = hk_matrix(model, &pts, k).entries;
    let scale = sigma_max(&h);
    let (_, t) = h.schur().unpack();
    let mut ev: Vec<C> = t.diagonal().iter().copied().collect();
    ev.sort_by(|a, b| a.norm().total_cmp(&b.norm()).then(a.re.total_cmp(&b.re)).then(a.im.total_cmp(&b.im)));
    (ev, scale)
}

/// Writes the eigenvalues of the truncated `H_k`, sorted by modulus.
pub fn cmd_spectrum(run: &Run) -> Result<Report> {
    let cfg = &run.config.spectrum;
    let model = &run.model;
    let k = KPoint::new(C::new(cfg.k1[0], cfg.k1[1]), C::new(cfg.k2[0], cfg.k2[1]));
    let radius = cfg.window_radius.unwrap_or(model.params.window_radius);
    let (ev, scale) = spectrum(model, &k, radius);
    let tail = tail_budget(model, &IndexWindow::ball(&model.lattice, radius, &[DualPoint::ZERO]), &k);
    let hdr = header(run, "spectrum", radius, tail, model.params.rho);
    let mut report = Report { command: "spectrum".into(), ..Default::default() };
    let mut table = Table::new(&["rank", "re", "im", "modulus"]);
    for (i, z) in ev.iter().enumerate() {
        table.push(vec![i.to_string(), num(z.re), num(z.im), num(z.norm())]);
    }
    report.note("eigenvalues", ev.len());
    report.note("smallest_over_scale", num(ev.first().map_or(f64::NAN, |z| z.norm()) / scale));
    report.files.push(table.write(&run.out.join("spectrum.csv"), &hdr)?);
    finish(run, report, &hdr)
}

/// The free symbol values `N_b(k)` on the same ball, sorted like [`spectrum`].
pub fn free_values(model: &Model, k: &KPoint, radius: f64) -> Vec<C> {
    let lat = &model.lattice;
    let mut v: Vec<C> =
        IndexWindow::ball(lat, radius, &[]).all_points.iter().map(|b| crate::freecurve::n_full(lat, *b, k)).collect();
    v.sort_by(|a, b| a.norm().total_cmp(&b.norm()).then(a.re.total_cmp(&b.re)).then(a.im.total_cmp(&b.im)));
    v
}
