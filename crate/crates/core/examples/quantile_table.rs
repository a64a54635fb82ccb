//! Builds the tabulated standardized quantile map, stores it on disk and
//! compares it with the direct root-finding solver.

use std::time::Instant;

use latent_sgc::skewnormal::{standardized_map_direct, QuantileTable};

fn main() -> latent_sgc::Result<()> {
    let t = Instant::now();
    let table = QuantileTable::build();
    println!("built {} skewness rows in {:.2} s", table.len(), t.elapsed().as_secs_f64());

    let path = std::env::temp_dir().join("sgc_quantile_table.bin");
    table.save(&path)?;
    let loaded = QuantileTable::load(&path)?;
    println!("round trip through {}: {}", path.display(), if loaded.gammas() == table.gammas() { "ok" } else { "mismatch" });

    println!("\n{:>6} {:>6} {:>10} {:>10} {:>9}", "γ", "z", "table", "direct", "error");
    for g in [-0.95, -0.5, 0.3, 0.8] {
        for z in [-3.0, -1.0, 0.0, 2.5] {
            let fast = table.map(g, z)?;
            let direct = standardized_map_direct(g, z)?;
            println!("{g:>6.2} {z:>6.1} {fast:>10.6} {direct:>10.6} {:>9.1e}", (fast - direct).abs());
        }
    }
    Ok(())
}
