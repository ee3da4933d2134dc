use fermicurve::asymptotics::{
    alpha1, alpha10, alpha12, alpha_split, beta2_10, beta2_10_literal, cts_constants, default_split,
    fd_derivative_check, holomorphy_residual, inner_set, loglog_slope, swz_series, t_matrix, theta_a_l1, xy_bounds,
    xy_matrices, SplitWindows,
};
use fermicurve::fourier::{ScalarField, VectorField};
use fermicurve::freecurve::{theta, theta_c, KPoint};
use fermicurve::operator::{dense_inverse, schur_norm, CMat};
use fermicurve::presets;
use fermicurve::reduction::Reducer;
use fermicurve::{DualPoint, Lattice, Model, ParamOverrides};
use num_complex::Complex64 as C;

const I: C = C { re: 0.0, im: 1.0 };

/// A point of `T_1(0)` with `w = 0.01` and `k2 = t + 0.25 + 0.25i`.
fn on_sheet(t: f64) -> KPoint {
    let y = C::new(t + 0.25, 0.25);
    KPoint::new(I * y + 0.01, y)
}

fn max_entry(m: &CMat) -> f64 {
    m.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

fn sheet_split(red: &Reducer) -> SplitWindows {
    SplitWindows::for_reducer(red, 1, DualPoint::ZERO).unwrap()
}

#[test]
fn x_plus_y_is_t_on_the_near_field() {
    let model = presets::compact();
    let red = Reducer::for_g(&model, &[DualPoint::ZERO]);
    let sp = sheet_split(&red);
    assert!(!sp.g1.is_empty() && sp.g1.len() < sp.g3.len());
    for t in [6.0, 20.0, 80.0] {
        let k = on_sheet(t);
        let xy = xy_matrices(&model, &sp, &k).unwrap();
        let tm = t_matrix(&model, &sp.g3, &k).unwrap();
        let diff = &xy.x + &xy.y - &tm;
        assert!(max_entry(&diff) <= 1e-12 * max_entry(&tm), "t = {t}: {}", max_entry(&diff));
    }
}

#[test]
fn near_field_norms_respect_their_bounds() {
    let model = presets::compact();
    let red = Reducer::for_g(&model, &[DualPoint::ZERO]);
    let sp = sheet_split(&red);
    for t in [6.0, 20.0, 80.0] {
        let k = on_sheet(t);
        let xy = xy_matrices(&model, &sp, &k).unwrap();
        let (xb, yb) = xy_bounds(&model, &sp, &k);
        let (nx, ny) = (schur_norm(&xy.x), schur_norm(&xy.y));
        assert!(nx <= xb && xb < 1.0 / 3.0, "t = {t}: ||X|| = {nx}, bound {xb}");
        assert!(ny <= yb && yb < 1.0 / 14.0, "t = {t}: ||Y|| = {ny}, bound {yb}");
    }
}

#[test]
fn y_vanishes_without_magnetic_field() {
    let lat = Lattice::square_2pi();
    let (_, v) = presets::compact_fields();
    let model =
        Model::new(lat, VectorField::new(), v, ParamOverrides { epsilon: Some(0.08), ..Default::default() }).unwrap();
    let red = Reducer::for_g(&model, &[DualPoint::ZERO]);
    let sp = sheet_split(&red);
    let xy = xy_matrices(&model, &sp, &on_sheet(10.0)).unwrap();
    assert_eq!(max_entry(&xy.y), 0.0);
    assert!(max_entry(&xy.x) > 0.0);
}

#[test]
fn swz_resums_the_near_resolvent() {
    let model = presets::compact();
    let red = Reducer::for_g(&model, &[DualPoint::ZERO]);
    let sp = sheet_split(&red);
    let k = on_sheet(12.0);
    let xy = xy_matrices(&model, &sp, &k).unwrap();
    let tol = 1e-14;
    let swz = swz_series(&xy.x, &xy.y, tol).unwrap();
    let m = sp.g3.len();
    let exact = dense_inverse(&(CMat::identity(m, m) - &xy.x - &xy.y)).unwrap();
    let err = schur_norm(&(&swz.s + &swz.w + &swz.z - &exact));
    assert!(err <= swz.tail + 1e-13, "err {err:e}, tail {:e}", swz.tail);
    assert!(swz.tail < tol);
    assert!(schur_norm(&(&swz.s - dense_inverse(&(CMat::identity(m, m) - &xy.y)).unwrap())) < 1e-14);
}

#[test]
fn swz_degenerate_cases() {
    let model = presets::compact();
    let red = Reducer::for_g(&model, &[DualPoint::ZERO]);
    let sp = sheet_split(&red);
    let xy = xy_matrices(&model, &sp, &on_sheet(12.0)).unwrap();
    let m = sp.g3.len();
    let zero = CMat::zeros(m, m);
    let only_y = swz_series(&zero, &xy.y, 1e-14).unwrap();
    assert_eq!(max_entry(&only_y.w), 0.0);
    assert_eq!(max_entry(&only_y.z), 0.0);
    let only_x = swz_series(&xy.x, &zero, 1e-14).unwrap();
    assert_eq!(only_x.s, CMat::identity(m, m));
    assert_eq!(only_x.w, xy.x);
    let exact = dense_inverse(&(CMat::identity(m, m) - &xy.x)).unwrap();
    assert!(schur_norm(&(&only_x.s + &only_x.w + &only_x.z - exact)) < 1e-13);
    let big = &xy.x * C::new(1.2 / schur_norm(&xy.x), 0.0);
    assert!(swz_series(&big, &xy.y, 1e-12).is_err());
}

/// `f = q̂` and an asymmetric `g` so that no leading term cancels by symmetry.
fn test_fg(model: &Model) -> (ScalarField, ScalarField) {
    let lat = &model.lattice;
    let f = model.q.clone();
    let g = model.q.map(|b, x| x * C::new(1.0 + 0.5 * lat.point(b)[0], 0.3 * lat.point(b)[1]));
    (f, g)
}

#[test]
fn alpha_pieces_reassemble() {
    let model = presets::compact();
    let red = Reducer::for_g(&model, &[DualPoint::ZERO]);
    let sp = sheet_split(&red);
    let (f, g) = test_fg(&model);
    let fa = |b: DualPoint| -2.0 * I * theta_c(2, model.a_at(b));
    let l1 = |h: &dyn Fn(DualPoint) -> C| sp.g3.iter().map(|b| h(-*b).norm() + h(*b).norm()).sum::<f64>();
    for t in [6.0, 25.0, 90.0] {
        let k = on_sheet(t);
        let res = red.resolvent(&k).unwrap();
        let fq = |b: DualPoint| f.get(b);
        let gq = |b: DualPoint| g.get(b);
        for (ff, gg) in [(&fq as &dyn Fn(DualPoint) -> C, &gq as &dyn Fn(DualPoint) -> C), (&fa, &fa)] {
            let p = alpha_split(&res, &sp, ff, gg, 1e-15).unwrap();
            assert!(p.split_residual() < 1e-9, "t = {t}: split residual {:e}", p.split_residual());
            assert!(p.refinement_residual() < 1e-9, "t = {t}: refinement residual {:e}", p.refinement_residual());
            let closed = alpha10(&model.lattice, &model.a, 1, DualPoint::ZERO, &sp.g1, ff, gg);
            let scale = cts_constants(&model.lattice, &model.a, 1, model.params.epsilon, l1(ff), l1(gg))[0];
            assert!((closed - p.a10).norm() <= 1e-12 * scale, "{closed} vs {}", p.a10);
        }
    }
}

#[test]
fn alpha_refinement_constants_bound_the_pieces() {
    let model = presets::compact();
    let red = Reducer::for_g(&model, &[DualPoint::ZERO]);
    let sp = sheet_split(&red);
    let (f, g) = test_fg(&model);
    let l1 = |h: &ScalarField| h.iter().map(|(_, x)| x.norm()).sum::<f64>();
    let cts = cts_constants(&model.lattice, &model.a, 1, model.params.epsilon, l1(&f), l1(&g));
    for t in [6.0, 25.0, 90.0] {
        let res = red.resolvent(&on_sheet(t)).unwrap();
        let p = alpha_split(&res, &sp, &|b| f.get(b), &|b| g.get(b), 1e-15).unwrap();
        assert!(p.a10.norm() <= cts[0], "{} vs {}", p.a10.norm(), cts[0]);
        assert!(p.a11.norm() <= cts[1], "{} vs {}", p.a11.norm(), cts[1]);
        assert!(p.a12.norm() <= cts[2], "{} vs {}", p.a12.norm(), cts[2]);
    }
}

#[test]
fn alpha_decay_rates() {
    let model = presets::compact();
    let red = Reducer::for_g(&model, &[DualPoint::ZERO]);
    let sp = sheet_split(&red);
    let (f, g) = test_fg(&model);
    let (mut zs, mut a1s, mut a2s) = (vec![], vec![], vec![]);
    for t in [20.0, 40.0, 80.0, 160.0, 320.0] {
        let k = on_sheet(t);
        let (a1, a2) = alpha12(&model, &sp, &k, &|b| f.get(b), &|b| g.get(b), 1e-16).unwrap();
        zs.push(sp.z_r(&model.lattice, &k));
        a1s.push(a1.norm());
        a2s.push(a2.norm());
    }
    let (s1, s2) = (loglog_slope(&zs, &a1s), loglog_slope(&zs, &a2s));
    assert!((s1 + 1.0).abs() <= 0.15, "alpha1 slope {s1}");
    assert!((s2 + 2.0).abs() <= 0.15, "alpha2 slope {s2}");
}

#[test]
fn beta2_10_vanishes_for_free_and_single_pairs() {
    let lat = Lattice::square_2pi();
    assert_eq!(beta2_10(&lat, &VectorField::new(), 8.0, 1), C::new(0.0, 0.0));
    // A Hermitian pair ±b0 with 2b0 outside the support: the diagonal terms
    // of b0 and −b0 cancel and no off-diagonal term survives.
    let b0 = DualPoint(1, 0);
    let x = [C::new(1e-4, 2e-4), C::new(-3e-4, 0.5e-4)];
    let a = VectorField::from_entries([(b0, x), (-b0, [x[0].conj(), x[1].conj()])]).unwrap();
    assert!(beta2_10(&lat, &a, 8.0, 1).norm() < 1e-22);
    // A single (complex) mode: nothing pairs up either way.
    let single = VectorField::from_entries([(b0, x)]).unwrap();
    assert_eq!(beta2_10(&lat, &single, 8.0, 2), C::new(0.0, 0.0));
}

#[test]
fn beta2_10_matches_a_hand_expansion() {
    // Â on (1,0), (0,1), (1,1) and their negatives, with an inner set
    // |b| < 5/4 that excludes ±(1,1). Diagonal terms of b and −b cancel, so
    // only chains −b → c with b, c ∈ {±(1,0), ±(0,1)} and b − c = ±(1,1)
    // remain.
    let lat = Lattice::square_2pi();
    let modes = [
        (DualPoint(1, 0), [C::new(1e-4, 2e-4), C::new(-3e-4, 0.5e-4)]),
        (DualPoint(0, 1), [C::new(-2e-4, 0.7e-4), C::new(1e-4, 1e-4)]),
        (DualPoint(1, 1), [C::new(0.5e-4, -1e-4), C::new(2e-4, 0.0)]),
    ];
    let mut a = VectorField::new();
    for (b, v) in modes {
        a.insert(b, v).unwrap();
        a.insert(-b, [v[0].conj(), v[1].conj()]).unwrap();
    }
    let near = [DualPoint(1, 0), DualPoint(-1, 0), DualPoint(0, 1), DualPoint(0, -1)];
    for nu in [1u8, 2] {
        let nup = 3 - nu;
        let th = |b: DualPoint| theta(nup, lat.point(b));
        let ta = |b: DualPoint| theta_c(nup, a.get(b));
        let mut want = C::new(0.0, 0.0);
        for &b in &near {
            for &c in &near {
                let e = b - c;
                if e == DualPoint(1, 1) || e == DualPoint(-1, -1) {
                    want += ta(-b) / th(b) * ta(e) / th(c) * ta(c);
                }
            }
        }
        want *= 2.0 * I;
        let got = beta2_10(&lat, &a, 5.0, nu);
        assert!(want.norm() > 1e-14, "{want}");
        assert!((got - want).norm() <= 1e-9 * want.norm(), "nu = {nu}: {got} vs {want}");
    }
}

#[test]
fn beta2_10_cancels_when_the_inner_set_holds_the_support() {
    // Every surviving term is a zero-sum triple (−b, b−c, c) of support
    // points; summed over the orderings allowed by a large inner set the
    // weights Σ 1/(θ(p_i)θ(p_j)) = (θ₁+θ₂+θ₃)/(θ₁θ₂θ₃) vanish.
    for seed in 0..20 {
        let model = presets::random_admissible(seed, 2e-3);
        let split = default_split(&model);
        let scale = model.a_l1().powi(3) / model.lattice.lambda.powi(2);
        for nu in [1u8, 2] {
            assert!(beta2_10(&model.lattice, &model.a, split, nu).norm() < 1e-10 * scale);
            assert!(beta2_10_literal(&model.lattice, &model.a, split, nu).norm() > 1e-3 * scale);
        }
    }
}

#[test]
fn beta2_10_below_its_bound_on_random_admissible_models() {
    for seed in 0..40 {
        let model = presets::random_admissible(seed, 2e-3);
        assert!(model.smallness().pass);
        let lam = model.lattice.lambda;
        let eps = model.params.epsilon;
        let split = default_split(&model);
        for nu in [1u8, 2] {
            let b = beta2_10(&model.lattice, &model.a, split, nu);
            assert!(b.norm() < eps * eps / (100.0 * lam), "seed {seed}: {}", b.norm());
            let lit = beta2_10_literal(&model.lattice, &model.a, split, nu);
            assert!(lit.norm() < eps * eps / (100.0 * lam));
        }
    }
}

#[test]
fn beta2_10_is_the_leading_part_of_the_z_squared_coefficient() {
    // −z β₂⁽¹⁾ = α⁽¹'⁰⁾ + α⁽¹'¹⁾(w) + α⁽¹'²⁾ + α⁽¹'³⁾ with f = g = −2iθ_{ν'}(Â);
    // the leading constant must be β₂⁽¹'⁰⁾.
    let model = presets::compact();
    let red = Reducer::for_g(&model, &[DualPoint::ZERO]);
    let sp = sheet_split(&red);
    let fa = |b: DualPoint| -2.0 * I * theta_c(2, model.a_at(b));
    let res = red.resolvent(&on_sheet(30.0)).unwrap();
    let p = alpha_split(&res, &sp, &fa, &fa, 1e-15).unwrap();
    let b = beta2_10(&model.lattice, &model.a, sp.split, 1);
    assert!((p.a10 + b).norm() <= 1e-12 * model.a_l1().powi(2), "{} vs {b}", p.a10);
    let beta2 = res.jklm(DualPoint::ZERO, DualPoint::ZERO, 1).unwrap().j_nu;
    assert!((beta2 + p.phi).norm() <= 1e-12 * beta2.norm());
}

#[test]
fn inner_set_excludes_origin() {
    let lat = Lattice::square_2pi();
    let s = inner_set(&lat, 8.0);
    assert!(!s.contains(&DualPoint::ZERO));
    assert!(s.iter().all(|b| lat.norm(*b) < 2.0));
    assert_eq!(s.len(), 8);
}

#[test]
fn alpha1_derivatives_respect_explicit_constants() {
    let model = presets::compact();
    let red = Reducer::for_g(&model, &[DualPoint::ZERO]);
    let sp = sheet_split(&red);
    let (f, g) = test_fg(&model);
    let lam = model.lattice.lambda;
    let l1 = |h: &ScalarField| h.iter().map(|(_, x)| x.norm()).sum::<f64>();
    let fg = l1(&f) * l1(&g);
    let target = |k: &KPoint| alpha1(&model, &sp, k, &|b| f.get(b), &|b| g.get(b));
    for t in [10.0, 40.0, 160.0] {
        let k = on_sheet(t);
        let zr = sp.z_r(&model.lattice, &k);
        for (n, m, c) in [(1, 0, 13.0 / lam.powi(2)), (0, 1, 13.0 / lam.powi(2)), (1, 1, 65.0 / lam.powi(3))] {
            let step = if n + m == 1 { 1e-3 } else { 1e-2 };
            let rep = fd_derivative_check(&target, &k, n, m, step).unwrap();
            assert!(rep.value.norm() <= c * fg / zr, "t = {t} ({n},{m}): {} vs {}", rep.value.norm(), c * fg / zr);
        }
        assert!(holomorphy_residual(&target, &k, 0, 1e-4).unwrap() < 1e-7);
        assert!(holomorphy_residual(&target, &k, 1, 1e-4).unwrap() < 1e-7);
    }
}

#[test]
fn derivative_of_constant_is_zero() {
    let k = on_sheet(5.0);
    let c = |_: &KPoint| Ok(C::new(2.0, -1.0));
    for (n, m) in [(1, 0), (0, 1), (1, 1), (2, 0)] {
        let r = fd_derivative_check(&c, &k, n, m, 1e-5).unwrap();
        assert_eq!(r.value, C::new(0.0, 0.0));
    }
}

#[test]
fn derivative_check_flags_large_steps() {
    let k = KPoint::new(C::new(0.3, 0.0), C::new(0.0, 0.0));
    let f = |k: &KPoint| Ok((k.k1 * 40.0).exp());
    assert!(fd_derivative_check(&f, &k, 1, 1, 0.5).is_err() || fd_derivative_check(&f, &k, 2, 0, 0.5).is_err());
    let ok = fd_derivative_check(&f, &k, 1, 0, 1e-4).unwrap();
    assert!((ok.value - 40.0 * (k.k1 * 40.0).exp()).norm() < 1e-6 * ok.value.norm());
}

#[test]
fn theta_norm_is_half_the_euclidean_norm_for_real_vectors() {
    let a = VectorField::from_entries([(DualPoint(1, 0), [C::new(3.0, 0.0), C::new(4.0, 0.0)])]).unwrap();
    // θ_ν(a) = ½(s a2 + i a1), |θ| = ½|a| for real a.
    assert!((theta_a_l1(&a, 1) - 2.5).abs() < 1e-15);
}
