//! Fits a simulated Poisson random-intercept model and prints the
//! hyperparameter grid and a few refined marginals.

use latent_sgc::inla::fit;
use latent_sgc::model::{simulate_glmm, Family, GlmmModel};

fn main() -> latent_sgc::Result<()> {
    let sim = simulate_glmm(Family::Poisson, 50, 10, 1.5, 0.5, 1)?;
    let model = GlmmModel::new(sim.spec)?;
    let f = fit(&model)?;

    println!("{:>10} {:>12} {:>8}", "log tau_u", "log post", "weight");
    for c in &f.configurations {
        println!("{:>10.3} {:>12.3} {:>8.4}", c.point.theta[0], c.point.log_posterior, c.point.weight);
    }

    let best = f.configurations.iter().max_by(|a, b| a.point.weight.total_cmp(&b.point.weight)).unwrap();
    println!("\nat the heaviest grid point:");
    println!("{:<12} {:>9} {:>9} {:>9} {:>9}", "latent", "mode", "mean", "sd", "skew");
    for i in [0, 8, 50, 51, 52] {
        let m = &best.marginals[i];
        println!("{:<12} {:>9.4} {:>9.4} {:>9.4} {:>9.4}", f.latent_names[i], best.ga.mode[i], m.mean, m.sd, m.skewness);
    }
    println!("clamped marginals: {}", f.clamp_count());
    Ok(())
}
