//! Handles of a model whose potential lives on the `b2` axis: the two charts
//! agree, the handle constant `t_d` decays quickly with `|d|`, and points of
//! the model curve `z1 z2 = -t_d` lie in the kernel of `H_k`.
//!
//! `cargo run --release --example handles`

use fermicurve::handle::{analyze_handle, check_curve_points, handle_curve_points, HandleOptions};
use fermicurve::{presets, DualPoint};

fn main() -> fermicurve::Result<()> {
    let model = presets::axis_family(8, 2e-3);
    let eps = model.params.epsilon;
    println!("rho = {:.3}, handles need 2|d| > rho", model.params.rho);
    println!(
        "{:>8} {:>24} {:>10} {:>10} {:>10} {:>8} {:>10}",
        "d", "t_d", "fit gap", "symmetry", "centre", "points", "kernel"
    );
    for n in [1, 2, 3, 4, 6, 8] {
        let d = DualPoint(0, n);
        let h = match analyze_handle(&model, d, &HandleOptions::default()) {
            Ok(h) => h,
            Err(e) => {
                println!("{:>8} {e}", d.to_string());
                continue;
            }
        };
        let rec = &h.record;
        let pts = handle_curve_points(&h.first, eps, 3, 8);
        let kernel = check_curve_points(&h.first, &pts).into_iter().map(|(r, _)| r).fold(0.0, f64::max);
        println!(
            "{:>8} {:>24.4e} {:>10.1e} {:>10.1e} {:>10.1e} {:>8} {:>10.1e}",
            d.to_string(),
            rec.t_d,
            rec.oracle_gap,
            rec.symmetry_residual,
            rec.center_offset,
            pts.len(),
            kernel
        );
    }
    println!("centre offsets are compared with eps/900 = {:.2e}", eps / 900.0);
    Ok(())
}
