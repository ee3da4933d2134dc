use fermicurve::freecurve::sign;
use fermicurve::presets;
use fermicurve::sheet::{
    admissible, image_containment, injectivity_probe, ray, trace_sheet, SampleOutcome, TraceOptions,
};
use num_complex::Complex64 as C;

fn ts() -> Vec<f64> {
    vec![10.0, 14.0, 20.0, 28.0, 40.0, 56.0, 80.0]
}

#[test]
fn free_sheet_is_the_line() {
    let m = presets::free();
    for nu in [1, 2] {
        let tr = trace_sheet(&m, &ray(&ts()), nu, &TraceOptions::default()).unwrap();
        assert_eq!(tr.solved().count(), ts().len());
        for p in tr.solved() {
            assert_eq!(p.free_offset(), C::new(0.0, 0.0), "y = {}", p.y);
            assert_eq!(p.residual, 0.0);
        }
    }
}

#[test]
fn compact_sheet_lies_near_the_line_and_on_the_curve() {
    let m = presets::compact();
    let eps = m.params.epsilon;
    let lam = m.lattice.lambda;
    let opts = TraceOptions { kernel_check: true, ..Default::default() };
    for nu in [1, 2] {
        let tr = trace_sheet(&m, &ray(&ts()), nu, &opts).unwrap();
        assert_eq!(tr.failures().count(), 0);
        assert!(tr.solved().count() >= 5);
        for p in tr.solved() {
            assert!(p.free_offset().norm() < eps * eps / (40.0 * lam));
            assert!(p.residual < 1e-11, "residual {}", p.residual);
            assert!(p.kernel_ratio.unwrap() < 1e-7, "kernel {:?}", p.kernel_ratio);
            assert!(image_containment(&m, p.y, nu));
        }
        assert!(tr.max_derivative_deviation() < 0.1);
    }
}

#[test]
fn newton_converges_quadratically() {
    let m = presets::compact();
    let opts = TraceOptions { tol: 0.0, max_iters: 6, ..Default::default() };
    let tr = trace_sheet(&m, &ray(&[12.0]), 1, &opts).unwrap();
    let log = match &tr.outcomes[0] {
        SampleOutcome::Failed { last: Some(p), .. } => p.newton_log.clone(),
        SampleOutcome::Solved(p) => p.newton_log.clone(),
        o => panic!("{o:?}"),
    };
    // e_{n+1} ≲ C e_n² while above rounding
    let big: Vec<f64> = log.iter().copied().filter(|e| *e > 1e-14).collect();
    for w in big.windows(2) {
        assert!(w[1] < 10.0 * w[0] * w[0] + 1e-15, "{log:?}");
    }
}

#[test]
fn remainder_decays_along_the_ray() {
    let m = presets::compact();
    let tr = trace_sheet(&m, &ray(&[20.0, 40.0, 80.0, 160.0]), 2, &TraceOptions::default()).unwrap();
    let pts: Vec<_> = tr.solved().collect();
    assert_eq!(pts.len(), 4);
    for w in pts.windows(2) {
        assert!(w[1].r.norm() < w[0].r.norm(), "{} {}", w[0].r, w[1].r);
    }
}

#[test]
fn samples_outside_the_admissible_set_are_skipped() {
    let m = presets::compact();
    // y on top of θ_1(b) for b = (0,-2): y = 1 exactly
    let ys = vec![C::new(0.1, 0.0), C::new(-(sign(1)) * 0.0 + 1.0, 0.0), C::new(10.25, 0.25)];
    let tr = trace_sheet(&m, &ys, 1, &TraceOptions::default()).unwrap();
    assert!(matches!(tr.outcomes[0], SampleOutcome::Skipped { .. }));
    assert!(matches!(tr.outcomes[1], SampleOutcome::Skipped { .. }));
    assert!(matches!(tr.outcomes[2], SampleOutcome::Solved(_)));
    assert!(admissible(&m, C::new(10.25, 0.25), 1, m.params.rho).is_ok());
    let reason = admissible(&m, C::new(0.1, 0.0), 1, m.params.rho).unwrap_err();
    assert!(reason.contains("rho"), "{reason}");
}

#[test]
fn sheet_is_injective() {
    let m = presets::compact();
    let mut ys = ray(&ts());
    ys.extend(ts().iter().map(|t| C::new(t + 0.25, -0.3)));
    let tr = trace_sheet(&m, &ys, 1, &TraceOptions::default()).unwrap();
    let pts: Vec<_> = tr.solved().cloned().collect();
    let rep = injectivity_probe(&pts, 1e-9);
    assert!(rep.injective());
    assert!(rep.min_pair_distance > 0.1);
    assert!(rep.max_derivative_deviation < 0.1);
}

#[test]
fn tracing_is_deterministic() {
    let m = presets::compact();
    let a = trace_sheet(&m, &ray(&ts()), 1, &TraceOptions::default()).unwrap();
    let b = trace_sheet(&m, &ray(&ts()), 1, &TraceOptions::default()).unwrap();
    assert_eq!(a.outcomes, b.outcomes);
}
