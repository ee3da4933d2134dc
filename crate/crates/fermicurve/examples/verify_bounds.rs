//! Runs every certified bound on random samples of the compact model and
//! prints the worst measured value against its certificate.
//!
//! `cargo run --release --example verify_bounds`

use std::path::PathBuf;

use fermicurve::commands::cmd_verify;
use fermicurve::config::Run;
use fermicurve::output::read_csv;

fn main() -> fermicurve::Result<()> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/data/compact.toml");
    let mut run = Run::load(&path)?;
    run.config.verify.samples = 20;
    let report = cmd_verify(&run)?;
    let file = read_csv(&run.out.join("verify_bounds.csv"))?;
    let col = |name: &str| file.strings(name);
    let (bound, region, measured, certified, pass) =
        (col("bound")?, col("region")?, col("measured")?, col("certified")?, col("pass")?);
    println!("{:<14} {:<18} {:>24} {:>24} {:>5}", "bound", "region", "measured", "certified", "pass");
    for i in 0..bound.len() {
        println!("{:<14} {:<18} {:>24} {:>24} {:>5}", bound[i], region[i], measured[i], certified[i], pass[i]);
    }
    println!("\n{} failures; config hash {}", report.failures.len(), file.meta("config_hash").unwrap_or("?"));
    Ok(())
}
