//! Writes a simulated Poisson or Bernoulli GLMM as `data.csv` plus a
//! `model.toml` that the `sgc` binary can fit.
//!
//! ```text
//! cargo run --example simulate_data -- poisson /tmp/pois
//! sgc fit --config /tmp/pois/model.toml --out /tmp/pois/fit
//! ```

use std::path::PathBuf;

use latent_sgc::model::{simulate_glmm, Family};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let family = match args.next().as_deref() {
        Some("bernoulli") | Some("binomial") => Family::Binomial,
        _ => Family::Poisson,
    };
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "glmm".into()));
    std::fs::create_dir_all(&dir)?;
    let sim = simulate_glmm(family, 50, 10, 1.5, 0.5, 1)?;
    let mut w = csv::Writer::from_path(dir.join("data.csv"))?;
    w.write_record(["y", "g"])?;
    for (y, g) in sim.spec.y.iter().zip(&sim.spec.groups) {
        w.write_record([y.to_string(), g.to_string()])?;
    }
    w.flush()?;
    std::fs::write(
        dir.join("model.toml"),
        format!("family = \"{}\"\ndata = \"data.csv\"\nresponse = \"y\"\ngroup = \"g\"\nn_groups = 10\n", family.name()),
    )?;
    println!("true effects: {:?}", sim.effects);
    println!("wrote {}", dir.display());
    Ok(())
}
