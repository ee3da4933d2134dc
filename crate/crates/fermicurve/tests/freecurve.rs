use fermicurve::freecurve::{
    active_tubes, exceptional_b, in_tube, k_from_wz, line_intersection, n_full, n_line, order_relations, theta,
    w_coord, z_coord, KPoint, TubeIndex, I,
};
use fermicurve::{DualPoint, Lattice};
use num_complex::Complex64 as C;
use proptest::prelude::*;

fn k(k1: C, k2: C) -> KPoint {
    KPoint::new(k1, k2)
}

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

#[test]
fn line_values() {
    let lat = Lattice::square_2pi();
    let zero = k(c(0.0, 0.0), c(0.0, 0.0));
    assert!((n_line(&lat, DualPoint(1, 2), 2, &zero) - c(1.0, 2.0)).norm() < 1e-15);
    assert!(n_line(&lat, DualPoint::ZERO, 1, &k(I, c(1.0, 0.0))).norm() < 1e-15);
    let p = k(c(0.0, 3.0), c(5.0, 0.0));
    let n = n_line(&lat, DualPoint::ZERO, 1, &p);
    assert!((n - c(0.0, -2.0)).norm() < 1e-15);
    // |N_{0,1}| = |v − u^⊥| with u^⊥ = (u2, −u1)
    let (u, v) = (p.u, p.v);
    assert!((n.norm() - ((v[0] - u[1]).powi(2) + (v[1] + u[0]).powi(2)).sqrt()).abs() < 1e-14);
}

#[test]
fn full_symbol_values() {
    let lat = Lattice::square_2pi();
    let p = k(c(0.0, 3.0), c(5.0, 0.0));
    assert!((n_full(&lat, DualPoint::ZERO, &p) - c(16.0, 0.0)).norm() < 1e-13);
    assert!((n_full(&lat, DualPoint(1, 0), &k(c(0.0, 0.0), c(0.0, 0.0))) - c(1.0, 0.0)).norm() < 1e-15);
    let on_line = k(I * 4.0 - 2.0, c(4.0, 0.0));
    let b = DualPoint(2, 0);
    assert!(n_full(&lat, b, &on_line).norm() < 1e-13);
}

#[test]
fn theta_values() {
    assert!((theta(1, [0.0, 1.0]) - c(-0.5, 0.0)).norm() < 1e-15);
    assert!((theta(2, [1.0, 0.0]) - c(0.0, 0.5)).norm() < 1e-15);
    for nu in [1, 2] {
        assert!(((2.0 * I * theta(nu, [3.0, 4.0])).norm() - 5.0).abs() < 1e-14);
    }
}

#[test]
fn tube_membership() {
    let lat = Lattice::square_2pi();
    for t in [0.3, 2.0, 50.0] {
        assert!(in_tube(&lat, DualPoint::ZERO, 1, &k(I * t, c(t, 0.0)), 1e-6));
    }
    assert!(!in_tube(&lat, DualPoint::ZERO, 1, &k(c(0.0, 3.0), c(5.0, 0.0)), 0.08));
    // |N_{0,1}| = 0.5 exactly: the tube is open
    let boundary = k(c(0.5, 0.0), c(0.0, 0.0));
    assert_eq!(n_line(&lat, DualPoint::ZERO, 1, &boundary).norm(), 0.5);
    assert!(!in_tube(&lat, DualPoint::ZERO, 1, &boundary, 0.5));
}

#[test]
fn intersection_examples() {
    let lat = Lattice::square_2pi();
    let p = line_intersection(&lat, DualPoint::ZERO, DualPoint(0, 2));
    assert!(p.dist(&k(-I, c(-1.0, 0.0))) < 1e-15);
    assert!(n_line(&lat, DualPoint::ZERO, 1, &p).norm() < 1e-15);
    assert!(n_line(&lat, DualPoint(0, 2), 2, &p).norm() < 1e-15);
    assert!(line_intersection(&lat, DualPoint::ZERO, DualPoint::ZERO).dist(&k(c(0.0, 0.0), c(0.0, 0.0))) < 1e-15);
}

fn dual_point() -> impl Strategy<Value = DualPoint> {
    (-20i64..=20, -20i64..=20).prop_map(|(a, b)| DualPoint(a, b))
}

proptest! {
    #[test]
    fn intersection_lies_on_both_lines(b in dual_point(), cc in dual_point()) {
        let lat = Lattice::square_2pi();
        let p = line_intersection(&lat, b, cc);
        prop_assert!(n_line(&lat, b, 1, &p).norm() < 1e-12);
        prop_assert!(n_line(&lat, cc, 2, &p).norm() < 1e-12);
    }

    #[test]
    fn intersections_translate(b in dual_point(), cc in dual_point(), d in dual_point()) {
        let lat = Lattice::square_2pi();
        let p = line_intersection(&lat, b, cc).shift(lat.point(d));
        let q = line_intersection(&lat, b - d, cc - d);
        prop_assert!(p.dist(&q) < 1e-12);
    }

    #[test]
    fn theta_is_half_the_length(a in (-50.0f64..50.0, -50.0f64..50.0), nu in 1u8..=2) {
        let t = theta(nu, [a.0, a.1]);
        prop_assert!(((2.0 * t).norm() - a.0.hypot(a.1)).abs() < 1e-12);
    }

    #[test]
    fn wz_coordinates_invert(re in (-5.0f64..5.0, -5.0f64..5.0), im in (-30.0f64..30.0, -30.0f64..30.0), d in dual_point(), nu in 1u8..=2) {
        let lat = Lattice::square_2pi();
        let p = k(c(re.0, im.0), c(re.1, im.1));
        let (w, z) = (w_coord(&lat, nu, d, &p), z_coord(&lat, nu, d, &p));
        prop_assert!((w * z - n_full(&lat, d, &p)).norm() < 1e-10 * (1.0 + n_full(&lat, d, &p).norm()));
        prop_assert!(k_from_wz(&lat, nu, d, w, z).dist(&p) < 1e-12);
    }
}

#[test]
fn active_tube_examples() {
    let lat = Lattice::square_2pi();
    let eps = 0.08;
    let on_line = k(I * 20.3 + 0.01, c(20.3, 0.0));
    assert_eq!(active_tubes(&lat, &on_line, eps, 100.0).unwrap(), vec![TubeIndex { b: DualPoint::ZERO, nu: 1 }]);
    let d = DualPoint(0, 30);
    let x = line_intersection(&lat, DualPoint::ZERO, d).add([c(0.003, 0.001), c(0.0, -0.002)]);
    assert_eq!(
        active_tubes(&lat, &x, eps, 100.0).unwrap(),
        vec![TubeIndex { b: DualPoint::ZERO, nu: 1 }, TubeIndex { b: d, nu: 2 }]
    );
    let off = k(c(0.3, 10.0), c(0.2, -3.0));
    let brute: Vec<TubeIndex> = lat
        .enumerate_dual(40.0)
        .into_iter()
        .flat_map(|b| [1u8, 2].into_iter().map(move |nu| TubeIndex { b, nu }))
        .filter(|t| in_tube(&lat, t.b, t.nu, &off, eps))
        .collect();
    assert!(brute.is_empty());
    assert!(active_tubes(&lat, &off, eps, 40.0).unwrap().is_empty());
}

#[test]
fn exceptional_point_examples() {
    let lat = Lattice::square_2pi();
    let lam = lat.lambda;
    // on N_1(0), halfway between its crossings with N_2((0,−20)) and N_2((0,−21))
    let t = 10.25;
    let p = k(I * t, c(t, 0.0));
    assert_eq!(exceptional_b(&lat, &p).unwrap(), None);
    let d = DualPoint(0, 24);
    let x = line_intersection(&lat, DualPoint::ZERO, d).add([c(0.004, 0.002), c(-0.001, 0.003)]);
    assert_eq!(exceptional_b(&lat, &x).unwrap(), Some(d));
    // every other b in a generous window obeys the lower bound
    for b in lat.enumerate_dual(x.v_norm() * 2.0 + 10.0) {
        if b.is_zero() || b == d {
            continue;
        }
        let pb = lat.point(b);
        let ub = ((x.u[0] + pb[0]).powi(2) + (x.u[1] + pb[1]).powi(2)).sqrt();
        assert!(n_full(&lat, b, &x).norm() >= 0.5 * lam * (x.v_norm() + ub));
    }
}

#[test]
fn order_relation_examples() {
    let lat = Lattice::square_2pi();
    let t = 100.0;
    let p = k(I * t, c(t, 0.0));
    let z = z_coord(&lat, 1, DualPoint::ZERO, &p);
    assert!((z - 2.0 * I * t).norm() < 1e-12);
    let r = order_relations(&lat, &p, 1, None).unwrap();
    assert!(r.all_hold());
    let (_, lo, mid, hi) = &r.checks[0];
    assert!((lo - 1.0 / 200.0).abs() < 1e-15 && (mid - 1.0 / 100.0).abs() < 1e-15 && (hi - 3.0 / 200.0).abs() < 1e-15);
    let d = DualPoint(0, 60);
    let x = line_intersection(&lat, DualPoint::ZERO, d);
    assert!((lat.norm(d) - 2.0 * x.v_norm()).abs() < 1e-12);
    assert!(order_relations(&lat, &x, 1, Some(d)).unwrap().all_hold());
}
