//! Timing of direct versus table-based skew-normal pdf, cdf and quantile map.

use std::hint::black_box;
use std::time::Instant;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::rng;
use crate::skewnormal::{quantile_table, standardized_map_direct, QuantileTable, SkewNormal, GAMMA_GRID_LEN};

/// Floor on the mean quantile speedup.
pub const MIN_QUANTILE_SPEEDUP: f64 = 5.0;
/// Ceiling on `|fast − direct|`.
pub const MAX_FAST_ERROR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub function: String,
    /// Seconds per replication.
    pub min: f64,
    pub mean: f64,
    pub max: f64,
    /// Largest `|fast − direct|` over the benchmark points; 0 for direct rows.
    pub max_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub replications: usize,
    pub points: usize,
    pub rows: Vec<BenchRow>,
    /// Mean direct quantile time over mean fast quantile time.
    pub quantile_speedup: f64,
    /// Largest `|fast − direct|` of the quantile map over the accuracy sweep.
    pub sweep_error: f64,
}

impl BenchReport {
    pub fn passed(&self) -> bool {
        self.quantile_speedup >= MIN_QUANTILE_SPEEDUP
            && self.sweep_error <= MAX_FAST_ERROR
            && self.rows.iter().all(|r| r.max_error <= MAX_FAST_ERROR)
    }

    pub fn row(&self, function: &str) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.function == function)
    }

    pub fn write_csv(&self, w: impl std::io::Write) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["function", "min", "mean", "max", "max_error"])?;
        for r in &self.rows {
            wr.write_record([r.function.clone(), r.min.to_string(), r.mean.to_string(), r.max.to_string(), r.max_error.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Benchmark points: normal scores on `[−3.5, 3.5]` and skewness values drawn
/// from the table grid, so both paths use the same γ.
pub fn mixed_points(count: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut r = rng::stream(seed, 0);
    let z = (0..count).map(|_| r.random_range(-3.5..3.5)).collect();
    let g = (0..count).map(|_| (r.random_range(0..GAMMA_GRID_LEN) as f64 - 99.0) / 100.0).collect();
    (z, g)
}

fn time(reps: usize, mut f: impl FnMut() -> Vec<f64>) -> (f64, f64, f64, Vec<f64>) {
    let mut times = Vec::with_capacity(reps);
    let mut last = Vec::new();
    for _ in 0..reps {
        let t = Instant::now();
        last = black_box(f());
        times.push(t.elapsed().as_secs_f64());
    }
    let min = times.iter().copied().fold(f64::INFINITY, f64::min);
    let max = times.iter().copied().fold(0.0, f64::max);
    (min, times.iter().sum::<f64>() / reps as f64, max, last)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Largest `|g_fast − g_direct|` over `z ∈ [−3.5, 3.5]` (step 0.01) and
/// `γ ∈ {−0.95, −0.90, …, 0.95}`.
pub fn quantile_sweep_error(table: &QuantileTable) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for k in 0..=38 {
        let g = ((-95 + 5 * k) as f64) / 100.0;
        for i in 0..=700 {
            let z = -3.5 + 0.01 * i as f64;
            worst = worst.max((table.map(g, z)? - standardized_map_direct(g, z)?).abs());
        }
    }
    Ok(worst)
}

/// Times the six paths over `replications` passes of `points` evaluations.
pub fn bench_quantile(replications: usize, points: usize, seed: u64) -> Result<BenchReport> {
    let table = quantile_table();
    let (z, g) = mixed_points(points, seed);
    let sn: Vec<SkewNormal> = g.iter().map(|&v| SkewNormal::standardized(v)).collect::<Result<_>>()?;
    let reps = replications.max(1);

    let f_std = time(reps, || sn.iter().zip(&z).map(|(s, &x)| s.pdf(x)).collect());
    let cdf_std = time(reps, || sn.iter().zip(&z).map(|(s, &x)| s.cdf(x)).collect());
    let q_std = time(reps, || sn.iter().zip(&z).map(|(s, &x)| s.quantile_of_normal_score(x)).collect());
    let idx: Vec<usize> = g.iter().map(|&v| table.lookup(v)).collect::<Result<_>>()?;
    let f_fast = time(reps, || g.iter().zip(&z).map(|(&v, &x)| table.pdf(v, x).unwrap_or(f64::NAN)).collect());
    let cdf_fast = time(reps, || g.iter().zip(&z).map(|(&v, &x)| table.cdf(v, x).unwrap_or(f64::NAN)).collect());
    let q_fast = time(reps, || idx.iter().zip(&z).map(|(&k, &x)| table.map_at(k, x)).collect());

    let row = |name: &str, t: &(f64, f64, f64, Vec<f64>), err: f64| BenchRow {
        function: name.into(),
        min: t.0,
        mean: t.1,
        max: t.2,
        max_error: err,
    };
    let rows = vec![
        row("f_std", &f_std, 0.0),
        row("F_std", &cdf_std, 0.0),
        row("Finv_std", &q_std, 0.0),
        row("f_fast", &f_fast, max_abs_diff(&f_fast.3, &f_std.3)),
        row("F_fast", &cdf_fast, max_abs_diff(&cdf_fast.3, &cdf_std.3)),
        row("Finv_fast", &q_fast, max_abs_diff(&q_fast.3, &q_std.3)),
    ];
    Ok(BenchReport {
        replications: reps,
        points,
        quantile_speedup: q_std.1 / q_fast.1,
        sweep_error: quantile_sweep_error(table)?,
        rows,
    })
}
