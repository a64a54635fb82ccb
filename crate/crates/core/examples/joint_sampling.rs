//! Draws from the joint posterior mixture with mean and skewness correction
//! and prints the summary table for a few components.

use latent_sgc::inla::fit;
use latent_sgc::model::{simulate_glmm, Family, GlmmModel};
use latent_sgc::sampler::{summarize, JointSampler};
use latent_sgc::sgc::CorrectionKind;

fn main() -> latent_sgc::Result<()> {
    let sim = simulate_glmm(Family::Poisson, 50, 10, 1.5, 0.5, 1)?;
    let f = fit(&GlmmModel::new(sim.spec)?)?;
    let sampler = JointSampler::new(&f)?;
    for kind in [CorrectionKind::Mean, CorrectionKind::Skew] {
        let draws = sampler.sample(kind, 100_000, 11)?;
        let table = summarize(&draws)?;
        println!("{kind} correction");
        println!("{:<12} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}", "", "mean", "sd", "2.5%", "50%", "97.5%", "mode");
        for r in table.rows.iter().filter(|r| ["eta[6]", "eta[9]", "(Intercept)", "u[2]"].contains(&r.name.as_str())) {
            println!("{:<12} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4}", r.name, r.mean, r.sd, r.q025, r.q50, r.q975, r.mode);
        }
        println!();
    }
    Ok(())
}
