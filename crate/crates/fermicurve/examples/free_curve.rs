//! The free Fermi curve of the square lattice: the lines `T_ν(b)`, their
//! crossings and the free symbol `N_b(k)` that vanishes on them.
//!
//! `cargo run --example free_curve`

use fermicurve::freecurve::{in_tube, line_intersection, n_full, n_line, theta, w_coord, z_coord, KPoint};
use fermicurve::{presets, DualPoint};
use num_complex::Complex64 as C;

fn main() {
    let model = presets::free();
    let lat = &model.lattice;
    let eps = model.params.epsilon;
    println!("dual points with |b| <= 1.5: {:?}", lat.enumerate_dual(1.5));

    // a point of T_1(0): k1 = i k2 + w with small w lies in the tube
    let y = C::new(7.25, 0.25);
    let k = KPoint::new(C::new(0.0, 1.0) * y + 0.01, y);
    println!("\nk = ({:.3}, {:.3})", k.k1, k.k2);
    println!(
        "  N_0,1(k) = {:.3e}   (the line coordinate w = {:.3e})",
        n_line(lat, DualPoint::ZERO, 1, &k),
        w_coord(lat, 1, DualPoint::ZERO, &k)
    );
    println!("  N_0(k)   = {:.3e}   (= N_0,1 · N_0,2)", n_full(lat, DualPoint::ZERO, &k));
    println!(
        "  z = {:.3}, in T_1(0)-tube: {}",
        z_coord(lat, 1, DualPoint::ZERO, &k),
        in_tube(lat, DualPoint::ZERO, 1, &k, eps)
    );

    println!("\ncrossings of T_1(0) and T_2(d):");
    println!("{:>8} {:>26} {:>26} {:>22}", "d", "k1", "k2", "theta_1(d)");
    for d in [DualPoint(0, 1), DualPoint(1, 0), DualPoint(1, 1), DualPoint(0, 3), DualPoint(-4, 5)] {
        let x = line_intersection(lat, DualPoint::ZERO, d);
        let th = theta(1, lat.point(d));
        let n0 = n_full(lat, DualPoint::ZERO, &x).norm();
        let nd = n_full(lat, d, &x).norm();
        assert!(n0 < 1e-12 && nd < 1e-9, "both symbols vanish at the crossing");
        println!("{:>8} {:>26.4} {:>26.4} {:>22.4}", d.to_string(), x.k1, x.k2, th);
    }
}
