use std::fmt::Write as _;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::*;
use crate::artifact::FitArtifact;
use crate::bench::bench_quantile;
use crate::compare::{compare_component, gate, kld_marginal_vs_draws, write_report_csv, GATE_MIN_ABS_GAMMA};
use crate::error::Result;
use crate::inla::fit;
use crate::lincomb::{lincomb_from_fit, marginals_1d, transform_jmarginal, DensityTable, JointSgcSummary, LinCombMatrix, Marginal1d};
use crate::mcmc::{run_mcmc, ChainConfig};
use crate::model::{load_config, GlmmModel};
use crate::sampler::{density_estimate, summarize, summarize_column, JointSampler, SummaryRow, SUMMARY_HEADER};

/// Text for standard output and the process exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutcome {
    pub code: u8,
    pub report: String,
}

impl CommandOutcome {
    fn ok(report: String) -> Self {
        Self { code: 0, report }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

pub fn run(command: &Command) -> CliResult<CommandOutcome> {
    match command {
        Command::Fit(a) => cmd_fit(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Lincomb(a) => cmd_lincomb(a),
        Command::CompareMcmc(a) => cmd_compare(a),
        Command::BenchQuantile(a) => cmd_bench(a),
    }
}

fn out_dir(p: &Path) -> CliResult<()> {
    std::fs::create_dir_all(p).map_err(|e| CliError::new(EXIT_FAILURE, format!("cannot create {}: {e}", p.display())))
}

fn fit_path(p: &Path) -> PathBuf {
    if p.is_dir() { p.join(FIT_FILE) } else { p.to_path_buf() }
}

/// Loads a fit and the config path recorded next to it, if any.
fn load_fit(p: &Path) -> CliResult<(PathBuf, FitArtifact, Option<PathBuf>)> {
    let path = fit_path(p);
    if !path.is_file() {
        return Err(CliError::new(EXIT_MISSING_FIT, format!("fit file {} not found", path.display())));
    }
    let art = FitArtifact::load(&path).map_err(|e| CliError::new(EXIT_FAILURE, format!("{}: {e}", path.display())))?;
    let config = path.parent().and_then(|d| RunManifest::read(d).ok()).and_then(|m| m.config);
    Ok((path, art, config))
}

fn write_with(path: &Path, f: impl FnOnce(File) -> Result<()>) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::new(EXIT_FAILURE, format!("cannot write {}: {e}", path.display())))?;
    Ok(f(file)?)
}

fn cmd_fit(a: &FitArgs) -> CliResult<CommandOutcome> {
    let spec = load_config(&a.config).map_err(|e| CliError::new(EXIT_CONFIG, format!("{}: {e}", a.config.display())))?;
    let model = GlmmModel::new(spec.clone()).map_err(|e| CliError::new(EXIT_CONFIG, e.to_string()))?;
    let t = Instant::now();
    let f = fit(&model)?;
    let elapsed = t.elapsed();
    out_dir(&a.out)?;
    let art = FitArtifact::new(spec, f)?;
    art.save(&a.out.join(FIT_FILE))?;
    write_with(&a.out.join("grid.csv"), |w| {
        let mut wr = csv::Writer::from_writer(w);
        let mut header: Vec<String> = art.fit.hyper_names.clone();
        header.extend(["log_posterior", "weight", "converged"].map(String::from));
        wr.write_record(&header)?;
        for c in &art.fit.configurations {
            let mut rec: Vec<String> = c.point.theta.iter().map(|v| v.to_string()).collect();
            rec.extend([c.point.log_posterior.to_string(), c.point.weight.to_string(), c.ga.converged.to_string()]);
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    })?;
    let mut m = RunManifest::new("fit", &a.out, a.seed);
    m.config = Some(a.config.clone());
    m.write(&a.out)?;

    let converged = art.fit.all_converged();
    let mut report = String::new();
    let _ = writeln!(report, "grid points K = {}", art.fit.configurations.len());
    let _ = writeln!(report, "latent dimension N = {}, hyperparameters d = {}", art.fit.latent_dim(), art.fit.hyper_names.len());
    let _ = writeln!(report, "converged: {}", if converged { "yes" } else { "no" });
    let _ = writeln!(report, "clamped marginals: {}", art.fit.clamp_count());
    let _ = writeln!(report, "time: {:.3} s", elapsed.as_secs_f64());
    Ok(CommandOutcome { code: if converged { 0 } else { EXIT_CONVERGENCE }, report })
}

fn cmd_sample(a: &SampleArgs) -> CliResult<CommandOutcome> {
    let (path, art, config) = load_fit(&a.fit)?;
    let t = Instant::now();
    let samples = JointSampler::new(&art.fit)?.sample(a.kind.into(), a.count, a.seed)?;
    let elapsed = t.elapsed();
    out_dir(&a.out)?;
    write_with(&a.out.join("samples.csv"), |w| samples.write_csv(w))?;
    if a.binary {
        write_with(&a.out.join("samples.bin"), |w| samples.write_binary(w))?;
    }
    let summary = summarize(&samples)?;
    write_with(&a.out.join("summary.csv"), |w| summary.write_csv(w))?;
    let mut m = RunManifest::new("sample", &a.out, a.seed);
    m.config = config;
    m.input = Some(path);
    m.count = Some(a.count);
    m.kind = Some(CorrectionKind::from(a.kind).to_string());
    m.write(&a.out)?;
    Ok(CommandOutcome::ok(format!(
        "{} draws ({}) in {:.3} s\nsummary rows: {}\n",
        a.count,
        CorrectionKind::from(a.kind),
        elapsed.as_secs_f64(),
        summary.rows.len()
    )))
}

fn write_rows(path: &Path, rows: &[SummaryRow], kld: Option<&[f64]>) -> CliResult<()> {
    write_with(path, |w| {
        let mut wr = csv::Writer::from_writer(w);
        let mut header: Vec<&str> = SUMMARY_HEADER.to_vec();
        if kld.is_some() {
            header.push("Kld");
        }
        wr.write_record(&header)?;
        for (h, r) in rows.iter().enumerate() {
            let mut rec = vec![r.name.clone()];
            rec.extend([r.mean, r.sd, r.q025, r.q50, r.q975, r.mode].map(|v| v.to_string()));
            if let Some(k) = kld {
                rec.push(k[h].to_string());
            }
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    })
}

fn write_densities(path: &Path, tables: &[(String, DensityTable)]) -> CliResult<()> {
    write_with(path, |w| {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["name", "x", "density"])?;
        for (name, t) in tables {
            for (x, d) in t.x.iter().zip(&t.density) {
                wr.write_record([name.clone(), x.to_string(), d.to_string()])?;
            }
        }
        wr.flush()?;
        Ok(())
    })
}

fn cmd_lincomb(a: &LincombArgs) -> CliResult<CommandOutcome> {
    let mut report = String::new();
    let mut m = RunManifest::new("lincomb", &a.out, a.seed);
    if let Some(summary_path) = &a.summary {
        if a.mode != LincombMode::Deterministic {
            return Err(CliError::new(EXIT_CONFIG, "a joint summary input supports only the deterministic mode"));
        }
        let text = std::fs::read_to_string(summary_path)
            .map_err(|e| CliError::new(EXIT_FAILURE, format!("{}: {e}", summary_path.display())))?;
        let summary = JointSgcSummary::from_json(&text)?;
        let comb = LinCombMatrix::from_csv(&a.a_matrix, &summary.names)?;
        let t = Instant::now();
        let out = transform_jmarginal(&summary, &comb)?;
        let marginals = marginals_1d(&out)?;
        let elapsed = t.elapsed();
        out_dir(&a.out)?;
        write_deterministic(&a.out, &out, &marginals, None)?;
        let _ = writeln!(report, "deterministic: {} combinations in {:.6} s", out.dim(), elapsed.as_secs_f64());
        m.input = Some(summary_path.clone());
        m.write(&a.out)?;
        return Ok(CommandOutcome::ok(report));
    }
    let (path, art, config) = load_fit(a.fit.as_deref().expect("clap requires --fit or --summary"))?;
    let comb = LinCombMatrix::from_csv(&a.a_matrix, &art.fit.latent_names)?;
    out_dir(&a.out)?;
    let det = if a.mode != LincombMode::Sampling {
        let t = Instant::now();
        let (out, marginals) = lincomb_from_fit(&art.fit, &comb)?;
        let _ = writeln!(report, "deterministic: {} combinations in {:.6} s", out.dim(), t.elapsed().as_secs_f64());
        Some((out, marginals))
    } else {
        None
    };
    let sampled = if a.mode != LincombMode::Deterministic {
        let t = Instant::now();
        let samples = JointSampler::new(&art.fit)?.sample(a.kind.into(), a.count, a.seed)?;
        let y = &samples.x * comb.a.transpose();
        let columns: Vec<Vec<f64>> = (0..y.ncols()).map(|h| y.column(h).iter().copied().collect()).collect();
        let rows = columns.iter().zip(&comb.names).map(|(c, n)| summarize_column(n, c)).collect::<Result<Vec<_>>>()?;
        let _ = writeln!(report, "sampling: {} draws in {:.6} s", a.count, t.elapsed().as_secs_f64());
        Some((columns, rows))
    } else {
        None
    };
    match (&det, &sampled) {
        (Some((out, marginals)), Some((columns, rows))) => {
            let kld = marginals.iter().zip(columns).map(|(mg, c)| kld_marginal_vs_draws(mg, c)).collect::<Result<Vec<_>>>()?;
            write_deterministic(&a.out, out, marginals, Some(&kld))?;
            write_rows(&a.out.join("lincomb_sampling.csv"), rows, None)?;
            let kde: Vec<(String, DensityTable)> = marginals
                .iter()
                .zip(columns)
                .map(|(mg, c)| Ok((mg.name.clone(), density_estimate(c, &mg.table.x, None)?)))
                .collect::<Result<_>>()?;
            write_densities(&a.out.join("densities_sampling.csv"), &kde)?;
            for (mg, k) in marginals.iter().zip(&kld) {
                let _ = writeln!(report, "{}: KLD {k:.3e}", mg.name);
            }
        }
        (Some((out, marginals)), None) => write_deterministic(&a.out, out, marginals, None)?,
        (None, Some((_, rows))) => write_rows(&a.out.join("lincomb.csv"), rows, None)?,
        (None, None) => unreachable!("mode selects at least one path"),
    }
    m.config = config;
    m.input = Some(path);
    if sampled.is_some() {
        m.count = Some(a.count);
        m.kind = Some(CorrectionKind::from(a.kind).to_string());
    }
    m.write(&a.out)?;
    Ok(CommandOutcome::ok(report))
}

fn write_deterministic(dir: &Path, out: &JointSgcSummary, marginals: &[Marginal1d], kld: Option<&[f64]>) -> CliResult<()> {
    std::fs::write(dir.join("lincomb_summary.json"), out.to_json()? + "\n")
        .map_err(|e| CliError::new(EXIT_FAILURE, e.to_string()))?;
    let rows = marginals.iter().map(Marginal1d::summary).collect::<Result<Vec<_>>>()?;
    write_rows(&dir.join("lincomb.csv"), &rows, kld)?;
    let tables: Vec<(String, DensityTable)> = marginals.iter().map(|m| (m.name.clone(), m.table.clone())).collect();
    write_densities(&dir.join("densities.csv"), &tables)
}

fn component_indices(names: &[String], requested: &[String]) -> CliResult<Vec<usize>> {
    if requested.is_empty() {
        return Ok((0..names.len()).collect());
    }
    requested
        .iter()
        .map(|r| {
            let r = r.trim();
            names
                .iter()
                .position(|n| n == r)
                .or_else(|| r.parse::<usize>().ok().filter(|&i| i < names.len()))
                .ok_or_else(|| CliError::new(EXIT_DIMENSION, format!("unknown latent component '{r}'")))
        })
        .collect()
}

fn cmd_compare(a: &CompareArgs) -> CliResult<CommandOutcome> {
    let (path, art, config) = load_fit(&a.fit)?;
    let components = component_indices(&art.fit.latent_names, &a.components)?;
    let cfg = ChainConfig {
        iterations: a.chain.iterations,
        burn_in: a.chain.burn_in,
        thinning: a.chain.thinning,
        chains: a.chain.chains,
        seed: a.seed,
        ..ChainConfig::default()
    };
    out_dir(&a.out)?;
    let mut m = RunManifest::new("compare-mcmc", &a.out, a.seed);
    m.config = config;
    m.input = Some(path);
    m.count = Some(a.count);
    m.write(&a.out)?;

    let t = Instant::now();
    let oracle = run_mcmc(&art.spec, &cfg)?;
    let mcmc_time = t.elapsed();
    write_with(&a.out.join("mcmc_diagnostics.csv"), |w| {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["name", "rhat", "ess"])?;
        for (j, n) in oracle.names.iter().enumerate() {
            wr.write_record([n.clone(), oracle.rhat[j].to_string(), oracle.ess[j].to_string()])?;
        }
        wr.flush()?;
        Ok(())
    })?;
    if !oracle.converged(a.chain.rhat_max) {
        return Err(CliError::new(
            EXIT_ORACLE,
            format!("MCMC did not converge: max split-R̂ {:.4} > {}", oracle.max_rhat(), a.chain.rhat_max),
        ));
    }
    let sampler = JointSampler::new(&art.fit)?;
    let mean = sampler.sample(CorrectionKind::Mean, a.count, a.seed)?;
    let skew = sampler.sample(CorrectionKind::Skew, a.count, a.seed)?;
    let curves = a.out.join("curves");
    out_dir(&curves)?;
    let mut comparisons = Vec::with_capacity(components.len());
    for &i in &components {
        let c = compare_component(&art.fit, i, &oracle.pooled(i), mean.x.column(i).as_slice(), skew.x.column(i).as_slice())?;
        write_with(&curves.join(format!("central_{i}.csv")), |w| c.central.write_csv(w))?;
        write_with(&curves.join(format!("tail_{i}.csv")), |w| c.tail.write_csv(w))?;
        comparisons.push(c);
    }
    write_with(&a.out.join("report.csv"), |w| write_report_csv(&comparisons, w))?;
    let g = gate(&comparisons, GATE_MIN_ABS_GAMMA);
    std::fs::write(a.out.join("gate.json"), serde_json::to_string_pretty(&g).map_err(crate::Error::from)? + "\n")
        .map_err(|e| CliError::new(EXIT_FAILURE, e.to_string()))?;

    let mut report = String::new();
    let _ = writeln!(report, "mcmc: {} chains, max split-R̂ {:.4}, {:.1} s", cfg.chains, oracle.max_rhat(), mcmc_time.as_secs_f64());
    let _ = writeln!(report, "{:<14} {:>8} {:>12} {:>12}", "component", "gamma", "kld_mean", "kld_skew");
    for c in &comparisons {
        let _ = writeln!(report, "{:<14} {:>8.3} {:>12.3e} {:>12.3e}", c.name, c.gamma, c.kld_mean, c.kld_skew);
    }
    let _ = writeln!(
        report,
        "|gamma| >= {GATE_MIN_ABS_GAMMA}: skew at least as close on {}/{}, median skew KLD {:.3e}",
        g.skew_wins, g.considered, g.median_kld_skew
    );
    Ok(CommandOutcome::ok(report))
}

fn cmd_bench(a: &BenchArgs) -> CliResult<CommandOutcome> {
    let r = bench_quantile(a.replications, a.points, a.seed)?;
    out_dir(&a.out)?;
    write_with(&a.out.join("bench.csv"), |w| r.write_csv(w))?;
    std::fs::write(a.out.join("bench.json"), serde_json::to_string_pretty(&r).map_err(crate::Error::from)? + "\n")
        .map_err(|e| CliError::new(EXIT_FAILURE, e.to_string()))?;
    let mut m = RunManifest::new("bench-quantile", &a.out, a.seed);
    m.count = Some(a.points);
    m.write(&a.out)?;
    let mut report = String::new();
    let _ = writeln!(report, "{:<10} {:>12} {:>12} {:>12} {:>12}", "function", "min", "mean", "max", "max_error");
    for row in &r.rows {
        let _ = writeln!(report, "{:<10} {:>12.5} {:>12.5} {:>12.5} {:>12.3e}", row.function, row.min, row.mean, row.max, row.max_error);
    }
    let _ = writeln!(report, "quantile speedup {:.1}x, sweep error {:.3e}", r.quantile_speedup, r.sweep_error);
    let passed = r.passed();
    let _ = writeln!(report, "gate: {}", if passed { "pass" } else { "FAIL" });
    Ok(CommandOutcome { code: if passed { 0 } else { EXIT_BENCH }, report })
}

