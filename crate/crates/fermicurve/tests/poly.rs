use fermicurve::poly::{Poly2, PolyMap};
use num_complex::Complex64 as C;
use proptest::prelude::*;

const O: C = C::new(0.0, 0.0);

fn cx() -> impl Strategy<Value = C> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| C::new(a, b))
}

fn small_poly(deg: usize) -> impl Strategy<Value = Poly2> {
    proptest::collection::vec(cx(), (deg + 1) * (deg + 2) / 2).prop_map(move |cs| {
        let mut p = Poly2::zero(deg);
        let mut it = cs.into_iter();
        for i in 0..=deg {
            for j in 0..=deg - i {
                p.set(i, j, it.next().unwrap());
            }
        }
        p
    })
}

#[test]
fn torus_fit_recovers_polynomials() {
    let mut p = Poly2::zero(5);
    p.set(0, 0, C::new(1.0, 2.0));
    p.set(2, 1, C::new(-0.5, 0.0));
    p.set(0, 5, C::new(0.0, 3.0));
    let f = |x: [C; 2]| p.eval(x);
    let q = Poly2::fit_torus(&f, [O, O], 0.7, 16, 8);
    for i in 0..=8 {
        for j in 0..=8 - i {
            assert!((q.get(i, j) - p.get(i, j)).norm() < 1e-13, "({i},{j})");
        }
    }
}

#[test]
fn torus_fit_matches_exponential_taylor_coefficients() {
    let f = |x: [C; 2]| (x[0] + 2.0 * x[1]).exp();
    let q = Poly2::fit_torus(&f, [O, O], 0.5, 32, 10);
    let fact = |n: usize| (1..=n).map(|k| k as f64).product::<f64>();
    for i in 0..=10 {
        for j in 0..=10 - i {
            let exact = 2f64.powi(j as i32) / (fact(i) * fact(j));
            assert!((q.get(i, j).re - exact).abs() < 1e-12 && q.get(i, j).im.abs() < 1e-12);
        }
    }
}

proptest! {
    #[test]
    fn product_evaluates_as_product(p in small_poly(3), q in small_poly(3), x in (cx(), cx())) {
        let x = [x.0 * 0.5, x.1 * 0.5];
        let pq = p.truncate(6).mul(&q.truncate(6));
        prop_assert!((pq.eval(x) - p.eval(x) * q.eval(x)).norm() < 1e-12);
    }

    #[test]
    fn composition_evaluates_as_composition(p in small_poly(3), a in small_poly(2), b in small_poly(2), x in (cx(), cx())) {
        // inner map of degree ≤ 2 without constant term; p∘m has degree ≤ 6
        let mut a = a; a.set(0, 0, O);
        let mut b = b; b.set(0, 0, O);
        let m = PolyMap([a.truncate(6), b.truncate(6)]);
        let x = [x.0 * 0.5, x.1 * 0.5];
        let lhs = p.truncate(6).compose(&m).eval(x);
        prop_assert!((lhs - p.eval(m.eval(x))).norm() < 1e-12);
    }

    #[test]
    fn reversion_inverts_near_identity_maps(a in small_poly(4), b in small_poly(4)) {
        let n = 12;
        let mut pa = a.scale(C::new(0.05, 0.0));
        let mut pb = b.scale(C::new(0.05, 0.0));
        for p in [&mut pa, &mut pb] {
            p.set(0, 0, O);
            p.set(1, 0, O);
            p.set(0, 1, O);
        }
        let psi = PolyMap::identity(n).add(&PolyMap([pa.truncate(n), pb.truncate(n)]));
        let inv = psi.revert().unwrap();
        let x = [C::new(0.1, 0.05), C::new(-0.08, 0.1)];
        let back = psi.eval(inv.eval(x));
        prop_assert!((back[0] - x[0]).norm() < 1e-12 && (back[1] - x[1]).norm() < 1e-12);
    }

    #[test]
    fn derivative_matches_difference_quotient(p in small_poly(4), x in (cx(), cx())) {
        let x = [x.0 * 0.5, x.1 * 0.5];
        let h = 1e-6;
        for var in 0..2 {
            let mut xp = x; let mut xm = x;
            xp[var] += h; xm[var] -= h;
            let fd = (p.eval(xp) - p.eval(xm)) / (2.0 * h);
            prop_assert!((fd - p.derivative(var).eval(x)).norm() < 1e-7);
        }
    }
}
