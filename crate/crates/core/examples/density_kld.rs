//! Kernel density estimates and Kullback-Leibler divergences on a grid.

use latent_sgc::lincomb::{kld_1d, DensityTable};
use latent_sgc::rng;
use latent_sgc::sampler::{density_estimate, silverman_bandwidth};
use rand_distr::{Distribution, Normal};

fn main() -> latent_sgc::Result<()> {
    let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let grid = DensityTable::grid(-8.0, 8.0, 1601);
    let p = DensityTable::from_fn(grid.clone(), phi);
    for d in [0.04, 0.1, 0.5] {
        let q = DensityTable::from_fn(grid.clone(), |x| phi(x - d));
        println!("KLD(N(0,1) ‖ N({d},1)) = {:.6} (closed form {:.6})", kld_1d(&p, &q)?, d * d / 2.0);
    }

    let mut r = rng::stream(1, 0);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let inner = DensityTable::grid(-3.0, 3.0, 601);
    let exact = DensityTable::from_fn(inner.clone(), phi);
    for n in [1_000, 10_000, 100_000] {
        let mut draws: Vec<f64> = (0..n).map(|_| normal.sample(&mut r)).collect();
        let kde = density_estimate(&draws, &inner, None)?;
        draws.sort_by(f64::total_cmp);
        println!("n={n:>6}: bandwidth {:.4}, KLD(exact ‖ KDE) {:.2e}", silverman_bandwidth(&draws), kld_1d(&exact, &kde)?);
    }
    Ok(())
}
