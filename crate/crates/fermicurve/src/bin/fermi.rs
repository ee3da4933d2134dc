//! Command-line front end: `fermi <command> --config run.toml [--out DIR] [--threads N] [--seed S]`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fermicurve::commands::{self, exit_code_for, Report};
use fermicurve::config::Run;

#[derive(Parser)]
#[command(name = "fermi", version, about = "Complex Fermi curves of small-field periodic Schrödinger operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the configuration).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Random seed for sampled checks (overrides the configuration).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Real slice of the free curve: lines and intersections.
    Freecurve,
    /// Trace the regular sheet and check its invariants.
    Trace,
    /// Analyse the handles at the configured partners.
    Handles,
    /// Check every certified bound on random samples.
    Verify,
    /// Eigenvalues of the truncated operator at one point.
    Spectrum,
}

fn load(cli: &Cli) -> fermicurve::Result<Run> {
    let path = cli.config.as_ref().ok_or_else(|| fermicurve::Error::Config("--config is required".into()))?;
    let mut run = Run::load(path)?;
    if let Some(out) = &cli.out {
        run.out = out.clone();
    }
    if let Some(seed) = cli.seed {
        run.config.seed = seed;
    }
    Ok(run)
}

fn execute(cli: &Cli) -> fermicurve::Result<Report> {
    let run = load(cli)?;
    let cmd = cli.command;
    commands::with_threads(cli.threads, move || match cmd {
        Command::Freecurve => commands::cmd_freecurve(&run),
        Command::Trace => commands::cmd_trace(&run),
        Command::Handles => commands::cmd_handles(&run),
        Command::Verify => commands::cmd_verify(&run),
        Command::Spectrum => commands::cmd_spectrum(&run),
    })?
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(report) => {
            for (k, v) in &report.summary {
                println!("{k}: {v}");
            }
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            for f in &report.failures {
                eprintln!("FAIL {} [{}]: measured {:e}, limit {:e} {}", f.item, f.check, f.measured, f.limit, f.detail);
            }
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e) as u8)
        }
    }
}
