//! Brings `x1 x2 + r(x)` with small analytic `r` into the normal form
//! `z1 z2 + c` and checks the change of variables.
//!
//! `cargo run --example morse_normal_form`

use fermicurve::morse::{measure_bounds, morse_solve, MorseOptions};
use num_complex::Complex64 as C;

fn main() -> fermicurve::Result<()> {
    let r0 = C::new(4e-4, -3e-4);
    let r = |x: [C; 2]| r0 + 1e-3 * x[0] - 2e-3 * x[1] + C::new(0.0, 1.5e-3) * x[0] * x[0] + 1e-3 * (x[0] - x[1]).exp();
    let f = |x: [C; 2]| x[0] * x[1] + r(x);
    let delta = 0.5;
    let opts = MorseOptions::default();

    // sup of |Dr| and |D²r| on the polydisc, measured on its boundary
    let mb = measure_bounds(&f, delta, &opts)?;
    println!("measured bounds on D_{delta}: a = {:.4e}, b = {:.4e}", mb.a, mb.b);
    let (a, b) = (mb.a * 1.01, mb.b * 1.01);
    let m = morse_solve(&f, delta, a, b, &opts)?;
    println!("critical point xi = ({:.6e}, {:.6e})", m.xi[0], m.xi[1]);
    println!(
        "critical value c  = {:.6e}   (|c - r(0)| = {:.2e} <= a^2 = {:.2e})",
        m.c,
        (m.c - r([C::new(0.0, 0.0); 2])).norm(),
        a * a
    );
    println!("gradient residual {:.2e}, composition residual {:.2e}", m.grad_residual, m.composition_residual);
    println!(
        "|DPhi - I| = {:.3e} <= 18 b = {:.3e}; certified radius {:.3}",
        m.dphi_deviation,
        18.0 * b,
        m.certified_radius
    );

    for z in [[C::new(0.05, 0.0), C::new(0.0, 0.1)], [C::new(-0.1, 0.02), C::new(0.07, -0.03)]] {
        let x = m.phi(z);
        let res = (f(x) - z[0] * z[1] - m.c).norm();
        println!("z = ({:.3}, {:.3}): |f(Phi(z)) - z1 z2 - c| = {res:.2e}", z[0], z[1]);
    }
    Ok(())
}
