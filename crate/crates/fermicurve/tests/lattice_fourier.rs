use std::f64::consts::PI;

use fermicurve::fourier::{check_smallness, q_field, radius_r, weighted_l1, ScalarField, VectorField};
use fermicurve::{presets, DualPoint, Error, Lattice, Model, ParamOverrides};
use num_complex::Complex64 as C;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

/// Shortest nonzero dual vector by exhaustive search over integer coordinates.
fn brute_shortest(lat: &Lattice, reach: i64) -> f64 {
    let mut best = f64::MAX;
    for m1 in -reach..=reach {
        for m2 in -reach..=reach {
            if (m1, m2) != (0, 0) {
                best = best.min(lat.norm(DualPoint(m1, m2)));
            }
        }
    }
    best
}

#[test]
fn square_lattice_has_unit_dual() {
    let lat = Lattice::new([2.0 * PI, 0.0], [0.0, 2.0 * PI]).unwrap();
    assert!((lat.dual1[0] - 1.0).abs() < 1e-14 && lat.dual1[1].abs() < 1e-14);
    assert!(lat.dual2[0].abs() < 1e-14 && (lat.dual2[1] - 1.0).abs() < 1e-14);
    assert!((lat.lambda - 0.5).abs() < 1e-14);
    assert!((2.0 * lat.lambda - brute_shortest(&lat, 3)).abs() < 1e-14);
}

#[test]
fn unit_lattice_has_2pi_dual() {
    let lat = Lattice::new([1.0, 0.0], [0.0, 1.0]).unwrap();
    assert!((lat.dual1[0] - 2.0 * PI).abs() < 1e-12);
    assert!((lat.dual2[1] - 2.0 * PI).abs() < 1e-12);
    assert!((lat.lambda - PI).abs() < 1e-12);
    assert!((2.0 * lat.lambda - brute_shortest(&lat, 3)).abs() < 1e-12);
}

#[test]
fn collinear_generators_are_degenerate() {
    assert!(matches!(Lattice::new([1.0, 0.0], [2.0, 0.0]), Err(Error::DegenerateLattice { .. })));
}

#[test]
fn enumeration_counts() {
    let lat = Lattice::square_2pi();
    let unit = lat.enumerate_dual(1.0);
    assert_eq!(unit.len(), 5);
    for b in [DualPoint(0, 0), DualPoint(1, 0), DualPoint(-1, 0), DualPoint(0, 1), DualPoint(0, -1)] {
        assert!(unit.contains(&b));
    }
    assert_eq!(lat.enumerate_dual(1.5).len(), 9);
    assert_eq!(lat.enumerate_dual(0.0), vec![DualPoint::ZERO]);
}

fn generator() -> impl Strategy<Value = ([f64; 2], [f64; 2])> {
    (0.5f64..3.0, -1.0f64..1.0, 0.3f64..3.0, 0.2f64..2.8)
        .prop_map(|(a, sh, r, ang)| ([a, 0.0], [r * ang.cos() + sh, r * ang.sin()]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dual_basis_and_constants(g in generator()) {
        let lat = Lattice::new(g.0, g.1).unwrap();
        let gam = [lat.gamma1, lat.gamma2];
        let dual = [lat.dual1, lat.dual2];
        for (i, d) in dual.iter().enumerate() {
            for (j, g) in gam.iter().enumerate() {
                let dot = d[0] * g[0] + d[1] * g[1];
                let want = if i == j { 2.0 * PI } else { 0.0 };
                prop_assert!((dot - want).abs() < 1e-12 * 2.0 * PI);
            }
        }
        prop_assert!((2.0 * lat.lambda - brute_shortest(&lat, 25)).abs() < 1e-10 * lat.lambda);
        prop_assert!(lat.alpha >= lat.lambda);
    }

    #[test]
    fn circumradius_matches_a_covering_scan(g in generator()) {
        // sup over the plane of the distance to the nearest dual point, sampled
        let lat = Lattice::new(g.0, g.1).unwrap();
        let pts: Vec<[f64; 2]> = lat.enumerate_dual(lat.alpha * 6.0 + 4.0 * lat.lambda).into_iter().map(|b| lat.point(b)).collect();
        let n = 60;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let (s, t) = (i as f64 / n as f64, j as f64 / n as f64);
                let x = [s * lat.dual1[0] + t * lat.dual2[0], s * lat.dual1[1] + t * lat.dual2[1]];
                let d = pts.iter().map(|p| ((p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2)).sqrt()).fold(f64::MAX, f64::min);
                worst = worst.max(d);
            }
        }
        let h = (lat.dual1[0].hypot(lat.dual1[1]) + lat.dual2[0].hypot(lat.dual2[1])) / n as f64;
        prop_assert!(worst <= lat.alpha * (1.0 + 1e-12));
        prop_assert!(worst >= lat.alpha - h);
    }

    #[test]
    fn enumeration_matches_brute_force(g in generator(), radius in 0.0f64..6.0) {
        let lat = Lattice::new(g.0, g.1).unwrap();
        let got = lat.enumerate_dual(radius);
        let reach = 40;
        let mut want = Vec::new();
        for m1 in -reach..=reach {
            for m2 in -reach..=reach {
                let b = DualPoint(m1, m2);
                if lat.norm(b) <= radius {
                    want.push(b);
                }
            }
        }
        want.sort();
        // points exactly on the boundary may be admitted by the relative slack
        prop_assert!(want.iter().all(|b| got.contains(b)));
        prop_assert!(got.iter().all(|b| lat.norm(*b) <= radius * (1.0 + 1e-10) + 1e-12));
        let mut sorted = got.clone();
        sorted.sort();
        prop_assert_eq!(sorted, got);
    }
}

#[test]
fn q_without_magnetic_field_is_v() {
    let lat = Lattice::square_2pi();
    let v = ScalarField::from_entries([(DualPoint(1, 0), c(0.1, 0.2)), (DualPoint(-2, 3), c(-0.3, 0.0))]).unwrap();
    assert_eq!(q_field(&lat, &VectorField::new(), &v), v);
}

#[test]
fn q_of_a_single_magnetic_mode() {
    let lat = Lattice::square_2pi();
    let b0 = DualPoint(1, 2);
    let a = [c(0.1, 0.05), c(-0.2, 0.3)];
    let af = VectorField::from_entries([(b0, a)]).unwrap();
    let q = q_field(&lat, &af, &ScalarField::new());
    let p = lat.point(b0);
    let lin = -(a[0] * p[0] + a[1] * p[1]);
    let quad = a[0] * a[0] + a[1] * a[1];
    assert!((q.get(b0) - lin).norm() < 1e-15);
    assert!((q.get(DualPoint(2, 4)) - quad).norm() < 1e-15);
    assert_eq!(q.len(), 2);
}

#[test]
fn q_of_a_real_magnetic_pair_has_mean() {
    let lat = Lattice::square_2pi();
    let b0 = DualPoint(0, 1);
    let a = [c(0.1, 0.05), c(-0.2, 0.3)];
    let ab = [a[0].conj(), a[1].conj()];
    let af = VectorField::from_entries([(b0, a), (-b0, ab)]).unwrap();
    let q = q_field(&lat, &af, &ScalarField::new());
    let want = 2.0 * (a[0] * ab[0] + a[1] * ab[1]);
    assert!((q.get(DualPoint::ZERO) - want).norm() < 1e-15);
}

/// `i∇·A + A·A + V` evaluated pointwise in real space from the Fourier sums.
fn q_real_space(lat: &Lattice, a: &VectorField, v: &ScalarField, x: [f64; 2]) -> C {
    let e = |b: DualPoint| {
        let p = lat.point(b);
        C::from_polar(1.0, p[0] * x[0] + p[1] * x[1])
    };
    let mut ax = [C::new(0.0, 0.0); 2];
    let mut div = C::new(0.0, 0.0);
    for (b, y) in a.iter() {
        let p = lat.point(b);
        ax[0] += y[0] * e(b);
        ax[1] += y[1] * e(b);
        div += C::i() * (p[0] * y[0] + p[1] * y[1]) * e(b);
    }
    let vx: C = v.iter().map(|(b, y)| y * e(b)).sum();
    C::i() * div + ax[0] * ax[0] + ax[1] * ax[1] + vx
}

#[test]
fn q_matches_real_space_evaluation() {
    let m = presets::random_admissible(17, 0.01);
    let q = q_field(&m.lattice, &m.a, &m.v);
    for x in [[0.3, 1.1], [2.0, -0.7], [5.5, 4.4]] {
        let series: C = q
            .iter()
            .map(|(b, y)| {
                let p = m.lattice.point(b);
                y * C::from_polar(1.0, p[0] * x[0] + p[1] * x[1])
            })
            .sum();
        assert!((series - q_real_space(&m.lattice, &m.a, &m.v, x)).norm() < 1e-14);
    }
}

#[test]
fn weighted_norm_examples() {
    let lat = Lattice::square_2pi();
    assert_eq!(weighted_l1(&lat, &ScalarField::new(), 2.0, false), 0.0);
    let f = ScalarField::from_entries([(DualPoint(1, 0), c(0.1, 0.0))]).unwrap();
    assert!((weighted_l1(&lat, &f, 2.0, false) - 0.2).abs() < 1e-15);
    let g = VectorField::from_entries([(DualPoint(1, 0), [c(0.01, 0.0), c(0.0, 0.02)])]).unwrap();
    assert!((weighted_l1(&lat, &g, 0.0, false) - 0.0005f64.sqrt()).abs() < 1e-15);
    let h = ScalarField::from_entries([(DualPoint::ZERO, c(1.0, 0.0)), (DualPoint(0, 2), c(0.0, 0.5))]).unwrap();
    assert!((weighted_l1(&lat, &h, 2.0, true) - 2.5).abs() < 1e-15);
}

#[test]
fn smallness_examples() {
    let lat = Lattice::square_2pi();
    let eps = 0.08;
    let r = check_smallness(&lat, &VectorField::new(), eps);
    assert!(r.pass && (r.margin - 2.0 * eps / 63.0).abs() < 1e-16);
    // (1 + |b|²)|Â| = 2·0.0015 = 0.003 > 0.00254
    let big = VectorField::from_entries([(DualPoint(1, 0), [c(0.0015, 0.0), c(0.0, 0.0)])]).unwrap();
    assert!(!check_smallness(&lat, &big, eps).pass);
    let ok = VectorField::from_entries([(DualPoint(1, 0), [c(0.001, 0.0), c(0.0, 0.0)])]).unwrap();
    let r = check_smallness(&lat, &ok, eps);
    assert!(r.pass && (r.weighted_norm - 0.002).abs() < 1e-16);
}

#[test]
fn radius_examples() {
    let lat = Lattice::square_2pi();
    let none = VectorField::new();
    assert_eq!(radius_r(&lat, &none, &ScalarField::new(), 0.08), 1.0);
    // ‖(1+b²)q̂‖ = 2·0.25 = 0.5 → (4/0.08)·0.5 = 25
    let q = ScalarField::from_entries([(DualPoint(1, 0), c(0.25, 0.0))]).unwrap();
    assert!((radius_r(&lat, &none, &q, 0.08) - 25.0).abs() < 1e-12);
    let a = VectorField::from_entries([(DualPoint(1, 0), [c(0.01, 0.0), c(0.0, 0.0)])]).unwrap();
    assert!((radius_r(&lat, &a, &ScalarField::new(), 0.08) - 1.4).abs() < 1e-12);
}

#[test]
fn model_rejects_out_of_range_parameters() {
    let lat = Lattice::square_2pi();
    let eps = |e: f64| ParamOverrides { epsilon: Some(e), ..Default::default() };
    match Model::free(lat.clone(), eps(0.5 / 6.0)) {
        Err(Error::InvalidParameter(msg)) => assert!(msg.contains("Lambda/6")),
        other => panic!("{other:?}"),
    }
    assert!(Model::free(lat.clone(), eps(0.0)).is_err());
    let small_rho = ParamOverrides { rho: Some(0.5), ..Default::default() };
    match Model::free(lat.clone(), small_rho) {
        Err(Error::InvalidParameter(msg)) => assert!(msg.contains("rho >= R")),
        other => panic!("{other:?}"),
    }
    let mean = VectorField::from_entries([(DualPoint::ZERO, [c(0.001, 0.0), c(0.0, 0.0)])]).unwrap();
    assert!(matches!(Model::new(lat, mean, ScalarField::new(), ParamOverrides::default()), Err(Error::NonZeroMean(_))));
}

#[test]
fn duplicate_coefficients_are_rejected() {
    let mut f = ScalarField::new();
    f.insert(DualPoint(2, 1), c(1.0, 0.0)).unwrap();
    assert_eq!(f.insert(DualPoint(2, 1), c(0.5, 0.0)), Err(Error::DuplicateCoefficient(DualPoint(2, 1))));
}
