//! Eigenvalues of the truncated `H_k` on and off the Fermi curve: on a traced
//! sheet point one eigenvalue is zero to working precision.
//!
//! `cargo run --release --example spectrum`

use fermicurve::commands::{free_values, spectrum};
use fermicurve::freecurve::KPoint;
use fermicurve::presets;
use fermicurve::sheet::{trace_sheet, TraceOptions};
use num_complex::Complex64 as C;

fn main() -> fermicurve::Result<()> {
    let model = presets::compact();
    let radius = model.params.window_radius;
    let y = C::new(12.25, 0.25);
    let tr = trace_sheet(&model, &[y], 1, &TraceOptions::default())?;
    let p = tr.solved().next().expect("y is admissible");
    let on = p.k();
    let off = KPoint::new(on.k1 + 0.02, on.k2);
    for (name, k) in [("on the curve", on), ("off by 0.02", off)] {
        let (ev, scale) = spectrum(&model, &k, radius);
        let free = free_values(&model, &k, radius);
        println!("{name}: k = ({:.6}, {:.6}), {} eigenvalues, sigma_max = {scale:.3e}", k.k1, k.k2, ev.len());
        for (e, n) in ev.iter().zip(&free).take(4) {
            println!("  {e:>32.6e}   free {n:>32.6e}");
        }
        println!("  smallest |eigenvalue| / sigma_max = {:.2e}", ev[0].norm() / scale);
    }
    Ok(())
}
