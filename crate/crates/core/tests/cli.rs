use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use latent_sgc::artifact::FitArtifact;
use latent_sgc::cli::RunManifest;
use latent_sgc::lincomb::{marginals_1d, JointSgcSummary, Mixture};
use latent_sgc::model::{simulate_glmm, Family};
use tempfile::TempDir;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn sgc(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_sgc")).args(args).output().expect("spawn sgc");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes `data.csv` and `model.toml` for a simulated random-intercept model.
fn write_glmm(dir: &Path, family: Family, n: usize, m: usize, seed: u64) -> PathBuf {
    let sim = simulate_glmm(family, n, m, 1.5, 0.5, seed).unwrap();
    let mut text = String::from("y,g\n");
    for (y, g) in sim.spec.y.iter().zip(&sim.spec.groups) {
        text += &format!("{y},{g}\n");
    }
    std::fs::write(dir.join("data.csv"), text).unwrap();
    let extra = match family {
        Family::Gaussian { precision } => format!("gaussian_precision = {precision}\n"),
        _ => String::new(),
    };
    let cfg = dir.join("model.toml");
    std::fs::write(
        &cfg,
        format!("family = \"{}\"\n{extra}data = \"data.csv\"\nresponse = \"y\"\ngroup = \"g\"\nn_groups = {m}\n", family.name()),
    )
    .unwrap();
    cfg
}

fn fit_into(dir: &Path, cfg: &Path) -> PathBuf {
    let out = dir.join("fit");
    let r = sgc(&["fit", "--config", s(cfg), "--out", s(&out)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    out
}

fn poisson_fit() -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_glmm(dir.path(), Family::Poisson, 50, 10, 1);
    let fit = fit_into(dir.path(), &cfg);
    (dir, fit)
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn num(v: &str) -> f64 {
    v.parse().unwrap()
}

fn art_names(fit: &Path) -> Vec<String> {
    FitArtifact::load(&fit.join("fit.sgcfit")).unwrap().fit.latent_names
}

#[test]
fn poisson_fit_grid_size_and_determinism() {
    let (dir, fit) = poisson_fit();
    let art = FitArtifact::load(&fit.join("fit.sgcfit")).unwrap();
    let k = art.fit.configurations.len();
    assert!((5..=25).contains(&k), "K = {k}");
    assert!(art.fit.all_converged());

    let again = dir.path().join("again");
    let r = sgc(&["fit", "--config", s(&dir.path().join("model.toml")), "--out", s(&again)]);
    assert_eq!(r.code, 0);
    assert!(r.stdout.contains(&format!("grid points K = {k}")), "{}", r.stdout);
    assert_eq!(std::fs::read(fit.join("fit.sgcfit")).unwrap(), std::fs::read(again.join("fit.sgcfit")).unwrap());
    assert_eq!(std::fs::read(fit.join("grid.csv")).unwrap(), std::fs::read(again.join("grid.csv")).unwrap());
    let (header, rows) = read_csv(&fit.join("grid.csv"));
    assert_eq!(header.last().unwrap(), "converged");
    assert_eq!(rows.len(), k);
}

#[test]
fn model_without_hyperparameters_has_one_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("model.toml");
    std::fs::write(&cfg, "family = \"poisson\"\ncovariates = [\"x\"]\n[columns]\ny = [1, 0, 3, 2, 5]\nx = [-1, -0.5, 0, 0.5, 1]\n").unwrap();
    let out = dir.path().join("fit");
    let r = sgc(&["fit", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.contains("grid points K = 1"), "{}", r.stdout);
    assert!(r.stdout.contains("hyperparameters d = 0"));
}

#[test]
fn sample_outputs_and_manifest() {
    let (dir, fit) = poisson_fit();
    let out = dir.path().join("mean");
    let t = Instant::now();
    let r = sgc(&["sample", "--fit", s(&fit), "--kind", "mean", "--count", "1000", "--seed", "7", "--out", s(&out)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(t.elapsed().as_secs_f64() < 5.0);

    let (header, rows) = read_csv(&out.join("summary.csv"));
    assert_eq!(header, ["Index", "Mean", "Sd", "0.025quant", "0.5quant", "0.975quant", "Mode"]);
    assert_eq!(rows.len(), 50 + 1 + 10);
    for row in &rows {
        assert!(num(&row[3]) <= num(&row[4]) && num(&row[4]) <= num(&row[5]), "{row:?}");
        assert!(num(&row[2]) >= 0.0);
    }
    let (names, draws) = read_csv(&out.join("samples.csv"));
    assert_eq!(draws.len(), 1000);
    assert_eq!(names[0], "config");
    assert!(names.ends_with(&art_names(&fit)));

    let m = RunManifest::read(&out).unwrap();
    assert_eq!(m.command, "sample");
    assert_eq!(m.seed, 7);
    assert_eq!(m.count, Some(1000));
    assert_eq!(m.kind.as_deref(), Some("mean"));
    assert_eq!(m.config.as_deref(), Some(dir.path().join("model.toml").as_path()));
    assert_eq!(m.out, out);
    assert!(!m.version.is_empty());

    let again = dir.path().join("mean2");
    sgc(&["sample", "--fit", s(&fit), "--kind", "mean", "--count", "1000", "--seed", "7", "--out", s(&again)]);
    assert_eq!(std::fs::read(out.join("samples.csv")).unwrap(), std::fs::read(again.join("samples.csv")).unwrap());
    let other = dir.path().join("mean3");
    sgc(&["sample", "--fit", s(&fit), "--kind", "mean", "--count", "1000", "--seed", "8", "--out", s(&other)]);
    assert_ne!(std::fs::read(out.join("samples.csv")).unwrap(), std::fs::read(other.join("samples.csv")).unwrap());
}

#[test]
fn gaussian_model_skew_equals_mean() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_glmm(dir.path(), Family::Gaussian { precision: 2.0 }, 20, 4, 3);
    let fit = fit_into(dir.path(), &cfg);
    let mut summaries = Vec::new();
    for kind in ["mean", "skew"] {
        let out = dir.path().join(kind);
        let r = sgc(&["sample", "--fit", s(&fit), "--kind", kind, "--count", "20000", "--seed", "4", "--out", s(&out)]);
        assert_eq!(r.code, 0, "{}", r.stderr);
        summaries.push(read_csv(&out.join("summary.csv")).1);
    }
    for (a, b) in summaries[0].iter().zip(&summaries[1]) {
        let sd = num(&a[2]);
        // same seed: identical within about 1e-4 sd from the γ≈0 rounding
        for c in 1..6 {
            assert!((num(&a[c]) - num(&b[c])).abs() <= 1e-3 * sd, "{a:?} {b:?}");
        }
    }

    let art = FitArtifact::load(&fit.join("fit.sgcfit")).unwrap();
    assert!(art.fit.configurations.iter().flat_map(|c| &c.marginals).all(|m| m.skewness.abs() <= 1e-4));
}

#[test]
fn gaussian_regression_curves_agree_with_the_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("model.toml");
    let x: Vec<f64> = (0..30).map(|i| i as f64 / 10.0 - 1.5).collect();
    let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| 0.3 + 0.8 * v + ((i * 7919) % 13) as f64 / 13.0 - 0.5).collect();
    let fmt = |v: &[f64]| v.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(", ");
    std::fs::write(
        &cfg,
        format!("family = \"gaussian\"\ngaussian_precision = 4.0\ncovariates = [\"x\"]\n[columns]\ny = [{}]\nx = [{}]\n", fmt(&y), fmt(&x)),
    )
    .unwrap();
    let fit = fit_into(dir.path(), &cfg);
    let cmp = dir.path().join("cmp");
    let r = sgc(&[
        "compare-mcmc", "--fit", s(&fit), "--components", "eta[1],(Intercept),x", "--iterations", "410000", "--count",
        "100000", "--seed", "2", "--out", s(&cmp),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let (header, rows) = read_csv(&cmp.join("report.csv"));
    assert_eq!(header, ["index", "name", "gamma", "kld_mean", "kld_skew"]);
    assert_eq!(rows.len(), 3);
    for row in &rows {
        assert!(num(&row[2]).abs() <= 1e-4, "{row:?}");
        assert!(num(&row[3]) <= 1e-3 && num(&row[4]) <= 1e-3, "{row:?}");
    }
    let (h, curve) = read_csv(&cmp.join("curves/central_0.csv"));
    assert_eq!(h, ["x", "mcmc", "mean_corrected", "skew_corrected", "refined_marginal"]);
    assert_eq!(curve.len(), 401);
    assert!(cmp.join("curves/tail_0.csv").is_file());
}

#[test]
fn poisson_compare_reports_skewness_and_tails() {
    let (dir, fit) = poisson_fit();
    let cmp = dir.path().join("cmp");
    let r = sgc(&[
        "compare-mcmc", "--fit", s(&fit), "--components", "eta[6],u[2]", "--iterations", "410000", "--count",
        "50000", "--seed", "3", "--out", s(&cmp),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let (_, rows) = read_csv(&cmp.join("report.csv"));
    let skewed: Vec<&Vec<String>> = rows.iter().filter(|r| num(&r[2]).abs() >= 0.3).collect();
    assert!(!skewed.is_empty(), "{rows:?}");
    for row in skewed {
        assert!(num(&row[4]) <= num(&row[3]), "{row:?}");
    }
    let gate: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(cmp.join("gate.json")).unwrap()).unwrap();
    assert!(gate["considered"].as_u64().unwrap() >= 1);
    // negative skew: the tail window sits on the left
    let (_, central) = read_csv(&cmp.join("curves/central_52.csv"));
    let (_, tail) = read_csv(&cmp.join("curves/tail_52.csv"));
    assert!(num(&tail[400][0]) < num(&central[200][0]));
}

#[test]
fn oracle_non_convergence_exit_code() {
    let (dir, fit) = poisson_fit();
    let r = sgc(&[
        "compare-mcmc", "--fit", s(&fit), "--iterations", "2000", "--burn-in", "1000", "--thinning", "1", "--chains", "2",
        "--rhat-max", "1.0001", "--out", s(&dir.path().join("cmp")),
    ]);
    assert_eq!(r.code, 6, "{}", r.stderr);
    assert!(dir.path().join("cmp/mcmc_diagnostics.csv").is_file());
}

fn worked_example_summary(dir: &Path) -> PathBuf {
    let p = dir.join("summary.json");
    std::fs::write(
        &p,
        r#"{"names": ["x1", "x2"], "mean": [1, 2], "cov": [[2, 1], [1, 5]], "skewness": [-0.4, 0.6]}"#,
    )
    .unwrap();
    p
}

#[test]
fn lincomb_worked_example_from_summary() {
    let dir = tempfile::tempdir().unwrap();
    let summary = worked_example_summary(dir.path());
    let a = dir.path().join("a.csv");
    std::fs::write(&a, "name,x1,x2\nsum,1,1\ndiff,1,-1\n").unwrap();
    let out = dir.path().join("lc");
    let r = sgc(&["lincomb", "--summary", s(&summary), "--a-matrix", s(&a), "--out", s(&out)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let res = JointSgcSummary::from_json(&std::fs::read_to_string(out.join("lincomb_summary.json")).unwrap()).unwrap();
    assert_eq!(res.names, ["sum", "diff"]);
    assert_eq!(res.mean, [3.0, -1.0]);
    assert_eq!(res.cov, [[9.0, -3.0], [-3.0, 5.0]]);
    assert!((res.skewness[0] - 0.206).abs() < 1e-3, "{:?}", res.skewness);
    assert!((res.skewness[1] + 0.701).abs() < 1e-3, "{:?}", res.skewness);

    // re-ingesting the written summary reproduces the written densities exactly
    let (header, rows) = read_csv(&out.join("densities.csv"));
    assert_eq!(header, ["name", "x", "density"]);
    let marginals = marginals_1d(&res).unwrap();
    let expected: Vec<[String; 3]> = marginals
        .iter()
        .flat_map(|m| m.table.x.iter().zip(&m.table.density).map(|(x, d)| [m.name.clone(), x.to_string(), d.to_string()]))
        .collect();
    assert_eq!(rows.len(), expected.len());
    assert!(rows.iter().zip(&expected).all(|(r, e)| r[..] == e[..]));

    let r = sgc(&["lincomb", "--summary", s(&summary), "--a-matrix", s(&a), "--mode", "both", "--out", s(&out)]);
    assert_eq!(r.code, 2, "{}", r.stderr);
}

#[test]
fn lincomb_on_a_fit() {
    let (dir, fit) = poisson_fit();
    let art = FitArtifact::load(&fit.join("fit.sgcfit")).unwrap();
    let names = &art.fit.latent_names;
    let picks = [0usize, 50, 51];
    let identity = dir.path().join("id.csv");
    let mut text = String::from("name");
    for n in names {
        text += &format!(",\"{n}\"");
    }
    text += "\n";
    for &p in &picks {
        text += &format!("\"{}\"", names[p]);
        for j in 0..names.len() {
            text += if j == p { ",1" } else { ",0" };
        }
        text += "\n";
    }
    std::fs::write(&identity, text).unwrap();
    let out = dir.path().join("id");
    let r = sgc(&["lincomb", "--fit", s(&fit), "--a-matrix", s(&identity), "--mode", "both", "--count", "20000", "--out", s(&out)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let res = JointSgcSummary::from_json(&std::fs::read_to_string(out.join("lincomb_summary.json")).unwrap()).unwrap();
    let mix = Mixture::from_fit(&art.fit).unwrap();
    for (h, &p) in picks.iter().enumerate() {
        let m1 = mix.raw_moment(p, 1).unwrap();
        let var = mix.raw_moment(p, 2).unwrap() - m1 * m1;
        assert!((res.mean[h] - m1).abs() < 1e-12 * (1.0 + m1.abs()));
        assert!((res.cov[h][h] - var).abs() < 1e-10 * var);
        assert_eq!(res.names[h], names[p]);
    }
    let (header, rows) = read_csv(&out.join("lincomb.csv"));
    assert_eq!(header.last().unwrap(), "Kld");
    assert!(num(&rows[0][7]) < 5e-3, "{rows:?}");
    assert!(rows.iter().all(|r| num(&r[7]).is_finite()));
    assert!(out.join("lincomb_sampling.csv").is_file() && out.join("densities_sampling.csv").is_file());

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "1,1,0\n").unwrap();
    let r = sgc(&["lincomb", "--fit", s(&fit), "--a-matrix", s(&bad), "--out", s(&dir.path().join("bad"))]);
    assert_eq!(r.code, 5, "{}", r.stderr);
}

#[test]
fn error_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere");
    let r = sgc(&["sample", "--fit", s(&missing), "--out", s(&dir.path().join("o"))]);
    assert_eq!(r.code, 4, "{}", r.stderr);
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "family = \"weibull\"\n[columns]\ny = [1]\n").unwrap();
    let r = sgc(&["fit", "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
    assert_eq!(r.code, 2, "{}", r.stderr);
    let r = sgc(&["fit", "--config", s(&missing), "--out", s(&dir.path().join("o"))]);
    assert_eq!(r.code, 2, "{}", r.stderr);
    let summary = worked_example_summary(dir.path());
    let a = dir.path().join("a.csv");
    std::fs::write(&a, "name,x1,x3\nsum,1,1\n").unwrap();
    let r = sgc(&["lincomb", "--summary", s(&summary), "--a-matrix", s(&a), "--out", s(&dir.path().join("o"))]);
    assert_eq!(r.code, 5, "{}", r.stderr);
}
