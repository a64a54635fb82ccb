//! Componentwise random-walk Metropolis over the latent field and the
//! hyperparameter, used as a reference for the approximations.
//!
//! Chains run in the coordinates `(β, u, ε, θ)` with `η = Dβ + ε` (here β
//! holds every parameter-block entry, random effects included). Because the
//! predictor noise `ε` has a tiny prior sd, these coordinates are far better
//! conditioned than `(η, β, u)` directly. Draws are reported in the latent
//! layout `x = (η, β, u)` followed by `θ`.

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{log_gamma_prior_on_log_precision, Family, ModelSpec};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub chains: usize,
    pub seed: u64,
    /// Adaptation target for the acceptance rate of every coordinate.
    pub target_acceptance: f64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self { iterations: 60_000, burn_in: 10_000, thinning: 5, chains: 4, seed: 1, target_acceptance: 0.3 }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.iterations {
            return Err(Error::InvalidSpec(format!("burn-in {} must be below iterations {}", self.burn_in, self.iterations)));
        }
        if self.thinning == 0 || self.chains == 0 {
            return Err(Error::InvalidSpec("thinning and chain count must be at least 1".into()));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return Err(Error::InvalidSpec("target acceptance must lie in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn kept_per_chain(&self) -> usize {
        (self.iterations - self.burn_in) / self.thinning
    }
}

/// Kept draws and convergence diagnostics.
#[derive(Debug, Clone)]
pub struct McmcRun {
    /// Latent names followed by hyperparameter names.
    pub names: Vec<String>,
    pub latent_dim: usize,
    /// One `kept × (N + d)` matrix per chain.
    pub chains: Vec<DMatrix<f64>>,
    /// Post-adaptation acceptance rate of every sampler coordinate, per chain.
    pub acceptance: Vec<Vec<f64>>,
    /// Split potential scale reduction per reported component.
    pub rhat: Vec<f64>,
    /// Effective sample size (batch means over the pooled chains).
    pub ess: Vec<f64>,
}

impl McmcRun {
    pub fn max_rhat(&self) -> f64 {
        self.rhat.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn converged(&self, bound: f64) -> bool {
        self.rhat.iter().all(|r| *r <= bound)
    }

    /// All kept draws of component `j`, chains concatenated.
    pub fn pooled(&self, j: usize) -> Vec<f64> {
        self.chains.iter().flat_map(|c| c.column(j).iter().copied().collect::<Vec<_>>()).collect()
    }

    pub fn write_csv(&self, w: impl std::io::Write) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["chain".to_string()];
        header.extend(self.names.iter().cloned());
        wr.write_record(&header)?;
        for (c, m) in self.chains.iter().enumerate() {
            for r in 0..m.nrows() {
                let mut rec = vec![c.to_string()];
                rec.extend(m.row(r).iter().map(|v| v.to_string()));
                wr.write_record(&rec)?;
            }
        }
        wr.flush()?;
        Ok(())
    }
}

/// Sparse view of the model used inside the chain.
struct Target<'a> {
    spec: &'a ModelSpec,
    family: Family,
    /// For each parameter-block entry: the observations it enters and the
    /// design coefficient.
    touches: Vec<Vec<(usize, f64)>>,
    design: Vec<Vec<(usize, f64)>>,
    fixed_prec: Vec<f64>,
    n_random: usize,
    tau_eps: f64,
}

impl<'a> Target<'a> {
    fn new(spec: &'a ModelSpec) -> Self {
        let np = spec.n_params();
        let mut touches = vec![Vec::new(); np];
        let design: Vec<Vec<(usize, f64)>> = (0..spec.n_obs()).map(|i| spec.design_row(i)).collect();
        for (i, row) in design.iter().enumerate() {
            for &(j, v) in row {
                touches[j].push((i, v));
            }
        }
        let mut fixed_prec = Vec::new();
        if spec.intercept {
            fixed_prec.push(spec.priors.intercept_precision);
        }
        fixed_prec.extend_from_slice(&spec.priors.fixed_precision);
        Self {
            spec,
            family: spec.family,
            touches,
            design,
            fixed_prec,
            n_random: spec.n_random(),
            tau_eps: spec.priors.predictor_precision,
        }
    }

    fn loglik(&self, i: usize, eta: f64) -> f64 {
        self.family.loglik(self.spec.y[i], self.spec.trial(i), eta)
    }

    fn param_precision(&self, j: usize, theta: f64) -> f64 {
        if j < self.fixed_prec.len() { self.fixed_prec[j] } else { theta.exp() }
    }

    fn log_theta_density(&self, theta: f64, sum_u2: f64) -> f64 {
        let p = &self.spec.priors;
        log_gamma_prior_on_log_precision(theta, p.gamma_shape, p.gamma_rate) + 0.5 * self.n_random as f64 * theta
            - 0.5 * theta.exp() * sum_u2
    }
}

struct ChainState {
    beta: Vec<f64>,
    eps: Vec<f64>,
    theta: f64,
    eta: Vec<f64>,
    ll: Vec<f64>,
}

fn run_chain(target: &Target, cfg: &ChainConfig, chain: usize) -> (DMatrix<f64>, Vec<f64>) {
    let spec = target.spec;
    let n = spec.n_obs();
    let np = spec.n_params();
    let nf = spec.n_fixed();
    let has_theta = target.n_random > 0;
    let coords = np + n + has_theta as usize;
    let mut r = rng::stream(cfg.seed, rng::CHAIN_BASE + chain as u64);
    let gauss = |r: &mut rng::Rng| -> f64 { StandardNormal.sample(r) };

    // Dispersed start: parameters around 0, θ around 0, ε at 0.
    let beta: Vec<f64> = (0..np).map(|_| gauss(&mut r)).collect();
    let eps = vec![0.0; n];
    let theta = if has_theta { gauss(&mut r) } else { 0.0 };
    let eta: Vec<f64> = (0..n).map(|i| target.design[i].iter().map(|&(j, v)| v * beta[j]).sum::<f64>() + eps[i]).collect();
    let ll: Vec<f64> = (0..n).map(|i| target.loglik(i, eta[i])).collect();
    let mut s = ChainState { beta, eps, theta, eta, ll };

    let mut log_scale: Vec<f64> = (0..coords)
        .map(|c| if c >= np && c < np + n { -0.5 * target.tau_eps.ln() } else { -1.0 })
        .collect();
    let mut accepted = vec![0usize; coords];
    let mut window = vec![0usize; coords];
    const WINDOW: usize = 50;
    let kept = cfg.kept_per_chain();
    let out_dim = n + np + has_theta as usize;
    let mut out = DMatrix::zeros(kept, out_dim);
    let mut row = 0;
    let mut new_eta: Vec<(usize, f64, f64)> = Vec::new();

    for it in 0..cfg.iterations {
        let adapting = it < cfg.burn_in;
        // Parameter block.
        let sum_u2_of = |beta: &[f64]| beta[nf..].iter().map(|u| u * u).sum::<f64>();
        for j in 0..np {
            let step = log_scale[j].exp() * gauss(&mut r);
            let old = s.beta[j];
            let prop = old + step;
            let prec = target.param_precision(j, s.theta);
            let mut delta = -0.5 * prec * (prop * prop - old * old);
            new_eta.clear();
            for &(i, v) in &target.touches[j] {
                let e = s.eta[i] + v * step;
                let l = target.loglik(i, e);
                delta += l - s.ll[i];
                new_eta.push((i, e, l));
            }
            if delta >= 0.0 || r.random::<f64>().ln() < delta {
                s.beta[j] = prop;
                for &(i, e, l) in &new_eta {
                    s.eta[i] = e;
                    s.ll[i] = l;
                }
                window[j] += 1;
                if !adapting {
                    accepted[j] += 1;
                }
            }
        }
        // Predictor noise.
        for i in 0..n {
            let c = np + i;
            let step = log_scale[c].exp() * gauss(&mut r);
            let old = s.eps[i];
            let prop = old + step;
            let e = s.eta[i] + step;
            let l = target.loglik(i, e);
            let delta = l - s.ll[i] - 0.5 * target.tau_eps * (prop * prop - old * old);
            if delta >= 0.0 || r.random::<f64>().ln() < delta {
                s.eps[i] = prop;
                s.eta[i] = e;
                s.ll[i] = l;
                window[c] += 1;
                if !adapting {
                    accepted[c] += 1;
                }
            }
        }
        // Log precision of the random effects.
        if has_theta {
            let c = np + n;
            let su2 = sum_u2_of(&s.beta);
            let prop = s.theta + log_scale[c].exp() * gauss(&mut r);
            let delta = target.log_theta_density(prop, su2) - target.log_theta_density(s.theta, su2);
            if delta >= 0.0 || r.random::<f64>().ln() < delta {
                s.theta = prop;
                window[c] += 1;
                if !adapting {
                    accepted[c] += 1;
                }
            }
        }
        if adapting && (it + 1) % WINDOW == 0 {
            let batch = ((it + 1) / WINDOW) as f64;
            let gain = (1.0 / batch.sqrt()).max(0.01);
            for c in 0..coords {
                let rate = window[c] as f64 / WINDOW as f64;
                log_scale[c] += gain * (rate - cfg.target_acceptance) * 2.0;
                window[c] = 0;
            }
        }
        if !adapting && (it - cfg.burn_in) % cfg.thinning == cfg.thinning - 1 && row < kept {
            for i in 0..n {
                out[(row, i)] = s.eta[i];
            }
            for j in 0..np {
                out[(row, n + j)] = s.beta[j];
            }
            if has_theta {
                out[(row, n + np)] = s.theta;
            }
            row += 1;
        }
    }
    let post = (cfg.iterations - cfg.burn_in) as f64;
    (out, accepted.iter().map(|&a| a as f64 / post).collect())
}

/// Runs `cfg.chains` independent chains in parallel.
pub fn run_mcmc(spec: &ModelSpec, cfg: &ChainConfig) -> Result<McmcRun> {
    spec.validate()?;
    cfg.validate()?;
    if !spec.constraints.is_empty() {
        return Err(Error::InvalidSpec("the reference sampler does not handle linear constraints".into()));
    }
    let target = Target::new(spec);
    let results: Vec<(DMatrix<f64>, Vec<f64>)> = (0..cfg.chains).into_par_iter().map(|c| run_chain(&target, cfg, c)).collect();
    let (chains, acceptance): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let mut names = spec.latent_names();
    if spec.n_random() > 0 {
        names.push("log tau_u".into());
    }
    let dim = names.len();
    let rhat = (0..dim).map(|j| split_rhat(&chains.iter().map(|c| c.column(j).as_slice().to_vec()).collect::<Vec<_>>())).collect();
    let ess = (0..dim)
        .map(|j| chains.iter().map(|c| batch_means_ess(c.column(j).as_slice())).sum())
        .collect();
    Ok(McmcRun { names, latent_dim: spec.dim(), chains, acceptance, rhat, ess })
}

/// Split-R̂: every chain is cut in half and the classic potential scale
/// reduction is computed over the halves.
pub fn split_rhat(chains: &[Vec<f64>]) -> f64 {
    let half = chains.iter().map(|c| c.len() / 2).min().unwrap_or(0);
    if half < 2 {
        return f64::NAN;
    }
    let seqs: Vec<&[f64]> = chains.iter().flat_map(|c| [&c[..half], &c[c.len() - half..]]).collect();
    let m = seqs.len() as f64;
    let n = half as f64;
    let means: Vec<f64> = seqs.iter().map(|s| s.iter().sum::<f64>() / n).collect();
    let grand = means.iter().sum::<f64>() / m;
    let b = n / (m - 1.0) * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>();
    let w = seqs
        .iter()
        .zip(&means)
        .map(|(s, mu)| s.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0))
        .sum::<f64>()
        / m;
    if w == 0.0 {
        return if b == 0.0 { 1.0 } else { f64::INFINITY };
    }
    let var = (n - 1.0) / n * w + b / n;
    (var / w).sqrt()
}

/// Effective sample size from non-overlapping batch means with
/// `⌊√n⌋` batches.
pub fn batch_means_ess(x: &[f64]) -> f64 {
    let n = x.len();
    let batches = (n as f64).sqrt().floor() as usize;
    if batches < 2 {
        return n as f64;
    }
    let size = n / batches;
    let used = size * batches;
    let mean = x[..used].iter().sum::<f64>() / used as f64;
    let var = x[..used].iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (used as f64 - 1.0);
    if var == 0.0 {
        return used as f64;
    }
    let bm: Vec<f64> = x[..used].chunks(size).map(|c| c.iter().sum::<f64>() / size as f64).collect();
    let bvar = bm.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (batches as f64 - 1.0);
    let asym = size as f64 * bvar;
    (used as f64 * var / asym).min(used as f64)
}

/// Random-walk Metropolis on a 2-D standard normal, one coordinate at a time.
pub fn standard_normal_chain(iterations: usize, scale: f64, seed: u64) -> DMatrix<f64> {
    let mut r = rng::stream(seed, rng::CHAIN_BASE);
    let mut x = [0.0f64; 2];
    let mut out = DMatrix::zeros(iterations, 2);
    for it in 0..iterations {
        for c in 0..2 {
            let step: f64 = StandardNormal.sample(&mut r);
            let prop = x[c] + scale * step;
            let delta = -0.5 * (prop * prop - x[c] * x[c]);
            if delta >= 0.0 || r.random::<f64>().ln() < delta {
                x[c] = prop;
            }
        }
        out[(it, 0)] = x[0];
        out[(it, 1)] = x[1];
    }
    out
}
