//! Runs the five commands on one configuration, as the `fermi` binary does,
//! and prints what each wrote.
//!
//! `cargo run --release --example pipeline [path/to/run.toml]`

use std::path::PathBuf;

use fermicurve::commands::{cmd_freecurve, cmd_handles, cmd_spectrum, cmd_trace, cmd_verify, Report};
use fermicurve::config::Run;

fn main() -> fermicurve::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/data/axis.toml"));
    let mut run = Run::load(&path)?;
    run.config.verify.samples = 10;
    println!("{} (hash {})", path.display(), &run.hash()[..16]);
    let commands: [fn(&Run) -> fermicurve::Result<Report>; 5] =
        [cmd_freecurve, cmd_trace, cmd_handles, cmd_verify, cmd_spectrum];
    for cmd in commands {
        let report = cmd(&run)?;
        println!("\n{} -> exit code {}", report.command, report.exit_code());
        for (k, v) in &report.summary {
            println!("  {k}: {v}");
        }
        for f in &report.files {
            println!("  wrote {}", f.display());
        }
        for f in &report.failures {
            println!("  FAIL {} [{}]: {:e} vs {:e}", f.item, f.check, f.measured, f.limit);
        }
    }
    Ok(())
}
