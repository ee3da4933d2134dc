//! Asymptotics of the regular sheet: the first and second order pieces of
//! `Φ_{0,0}` decay like `1/|z|` and `1/|z|²`, and the constant `β2` is below
//! its explicit bound.
//!
//! `cargo run --release --example asymptotic_decay`

use fermicurve::asymptotics::{alpha12, beta2_10, beta2_10_literal, default_split, loglog_slope, SplitWindows};
use fermicurve::freecurve::{KPoint, I};
use fermicurve::reduction::Reducer;
use fermicurve::{presets, DualPoint};
use num_complex::Complex64 as C;

fn main() -> fermicurve::Result<()> {
    let model = presets::compact();
    let lat = &model.lattice;
    let red = Reducer::for_g(&model, &[DualPoint::ZERO]);
    let sp = SplitWindows::for_reducer(&red, 1, DualPoint::ZERO)?;
    let f = model.q.clone();
    let g = model.q.map(|b, x| x * C::new(1.0 + 0.5 * lat.point(b)[0], 0.3 * lat.point(b)[1]));

    println!("{:>8} {:>12} {:>12} {:>12}", "t", "2|z|-R", "|alpha1|", "|alpha2|");
    let (mut zs, mut a1s, mut a2s) = (vec![], vec![], vec![]);
    for t in [20.0, 40.0, 80.0, 160.0, 320.0] {
        let y = C::new(t + 0.25, 0.25);
        let k = KPoint::new(I * y + 0.01, y);
        let (a1, a2) = alpha12(&model, &sp, &k, &|b| f.get(b), &|b| g.get(b), 1e-16)?;
        let z = sp.z_r(lat, &k);
        println!("{t:>8} {z:>12.4} {:>12.4e} {:>12.4e}", a1.norm(), a2.norm());
        zs.push(z);
        a1s.push(a1.norm());
        a2s.push(a2.norm());
    }
    println!("log-log slopes: alpha1 {:.3}, alpha2 {:.3}", loglog_slope(&zs, &a1s), loglog_slope(&zs, &a2s));

    let eps = model.params.epsilon;
    let split = default_split(&model);
    for nu in [1u8, 2] {
        let b = beta2_10(lat, &model.a, split, nu);
        let variant = beta2_10_literal(lat, &model.a, split, nu);
        println!(
            "nu = {nu}: beta2 = {b:.4e} (variant with theta_nu in the last slot: {variant:.4e}), bound eps^2/(100 Lambda) = {:.4e}",
            eps * eps / (100.0 * lat.lambda)
        );
    }
    Ok(())
}
