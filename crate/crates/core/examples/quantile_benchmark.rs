//! Times direct and tabulated skew-normal pdf, cdf and quantile map.
//!
//! ```text
//! cargo run --release --example quantile_benchmark -- 10 1000000
//! ```

use latent_sgc::bench::bench_quantile;

fn main() -> latent_sgc::Result<()> {
    let mut args = std::env::args().skip(1);
    let reps = args.next().and_then(|a| a.parse().ok()).unwrap_or(5);
    let points = args.next().and_then(|a| a.parse().ok()).unwrap_or(200_000);
    let r = bench_quantile(reps, points, 1)?;
    println!("{reps} replications of {points} points");
    println!("{:<10} {:>10} {:>10} {:>10} {:>10}", "function", "min", "mean", "max", "max error");
    for row in &r.rows {
        println!("{:<10} {:>10.4} {:>10.4} {:>10.4} {:>10.1e}", row.function, row.min, row.mean, row.max, row.max_error);
    }
    println!("quantile speedup {:.1}x, sweep error {:.2e}", r.quantile_speedup, r.sweep_error);
    Ok(())
}
