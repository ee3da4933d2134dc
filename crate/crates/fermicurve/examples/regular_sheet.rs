//! Traces the regular sheet `k1 = η(y)` of the compact model along a ray
//! and shows how close it stays to the free line and to the kernel of `H_k`.
//!
//! `cargo run --release --example regular_sheet`

use fermicurve::presets;
use fermicurve::sheet::{ray, trace_sheet, SampleOutcome, TraceOptions};

fn main() -> fermicurve::Result<()> {
    let model = presets::compact();
    let eps = model.params.epsilon;
    let lam = model.lattice.lambda;
    let opts = TraceOptions { kernel_check: true, ..Default::default() };
    let ts = [1.0, 4.0, 10.0, 20.0, 40.0, 80.0, 160.0];
    for nu in [1u8, 2] {
        let tr = trace_sheet(&model, &ray(&ts), nu, &opts)?;
        println!(
            "nu = {nu}: rho used {:.3}, |beta2| = {:.3e}, window {}",
            tr.rho_used,
            tr.beta2_10.norm(),
            tr.window_radius
        );
        println!("{:>20} {:>28} {:>12} {:>12} {:>10} {:>10}", "y", "eta", "|eta+isy|", "|r(y)|", "residual", "kernel");
        for o in &tr.outcomes {
            match o {
                SampleOutcome::Solved(p) => println!(
                    "{:>20.3} {:>28.6} {:>12.3e} {:>12.3e} {:>10.1e} {:>10.1e}",
                    p.y,
                    p.eta,
                    p.free_offset().norm(),
                    p.r.norm(),
                    p.residual,
                    p.kernel_ratio.unwrap_or(f64::NAN)
                ),
                SampleOutcome::Skipped { y, reason } => println!("{y:>20.3} skipped: {reason}"),
                SampleOutcome::Failed { y, error, .. } => println!("{y:>20.3} failed: {error}"),
            }
        }
        println!(
            "  bound on |eta + i s y|: {:.3e}; max |dF/dk1 - 1| = {:.3e}\n",
            eps * eps / (40.0 * lam),
            tr.max_derivative_deviation()
        );
    }
    Ok(())
}
