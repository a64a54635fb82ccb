//! Maps a (mean, variance, skewness) triple to skew-normal parameters and
//! evaluates the distribution.

use latent_sgc::skewnormal::{delta_parameterization, MomentTriple};

fn main() -> latent_sgc::Result<()> {
    for skew in [-0.9, -0.4, 0.0, 0.206, 0.7] {
        let sn = delta_parameterization(MomentTriple::new(3.0, 9.0, skew))?;
        let back = sn.moments();
        println!(
            "γ={skew:+.3}: ξ={:+.4} ω={:.4} α={:+.4} | mean {:.4} var {:.4} skew {:+.4} | mode {:+.4} median {:+.4}",
            sn.xi,
            sn.omega,
            sn.alpha,
            back.mean,
            back.variance,
            back.skewness,
            sn.mode(),
            sn.quantile(0.5)?
        );
    }

    let sn = delta_parameterization(MomentTriple::new(0.0, 1.0, -0.7))?;
    println!("\n{:>6} {:>10} {:>10}", "x", "pdf", "cdf");
    for k in -8..=4 {
        let x = k as f64 * 0.5;
        println!("{x:>6.1} {:>10.6} {:>10.6}", sn.pdf(x), sn.cdf(x));
    }
    Ok(())
}
