//! Loads a potential specification and a run configuration and prints the
//! derived model parameters and the configuration hash written into every
//! output header.
//!
//! `cargo run --example potential_file [path/to/potential.toml]`

use std::path::PathBuf;

use fermicurve::config::{ParamsSpec, PotentialSpec, Run};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/data").join(name)
}

fn main() -> fermicurve::Result<()> {
    let path = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| data("compact_potential.toml"));
    let spec = PotentialSpec::load(&path)?;
    let model = spec.model(&ParamsSpec::default())?;
    let lat = &model.lattice;
    let p = &model.params;
    println!("{}", path.display());
    println!("  lattice Lambda = {}", lat.lambda);
    println!("  Fourier support: A on {} points, V on {}, q on {}", model.a.len(), model.v.len(), model.q.len());
    println!("  ||A||_1 = {:.4e}, ||q||_1 = {:.4e}", model.a_l1(), model.q_l1());
    let sm = model.smallness();
    println!(
        "  smallness ||(1+|b|^2) A||_1 = {:.4e} < {:.4e} ({})",
        sm.weighted_norm,
        sm.limit,
        if sm.pass { "holds" } else { "fails" }
    );
    println!(
        "  epsilon = {}, R = {:.4}, rho = {:.4}, window radius = {}",
        p.epsilon, p.radius_r, p.rho, p.window_radius
    );

    // the same model written back is read as the same model
    let again = PotentialSpec::parse(&PotentialSpec::from_model(&model).to_toml()?)?.model(&ParamsSpec::default())?;
    assert_eq!(again.params.radius_r, p.radius_r);

    let run = Run::load(&data("compact.toml"))?;
    println!("\n{}", data("compact.toml").display());
    println!("  output directory {}", run.out.display());
    println!("  config hash {}", run.hash());
    Ok(())
}
