//! Density comparisons between reference draws and approximations.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::inla::InlaFit;
use crate::lincomb::{kld_1d, DensityTable, Marginal1d, Mixture};
use crate::sampler::{density_estimate, quantile_sorted};
use crate::skewnormal::{delta_parameterization, MomentTriple};

/// Points per comparison grid.
pub const COMPARISON_POINTS: usize = 401;
/// Central window of the reference distribution covered by the main grid.
pub const CENTRAL_WINDOW: (f64, f64) = (0.001, 0.999);
/// Skewness threshold for the correction gate.
pub const GATE_MIN_ABS_GAMMA: f64 = 0.3;

fn sorted(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// Equispaced grid between two quantiles of `sorted_draws`.
pub fn quantile_grid(sorted_draws: &[f64], lo: f64, hi: f64, n: usize) -> Vec<f64> {
    DensityTable::grid(quantile_sorted(sorted_draws, lo), quantile_sorted(sorted_draws, hi), n)
}

/// Density of the refined mixture marginal `Σ_k w_k SN(μ̃_ki, σ_ki, γ_ki)`.
pub fn refined_marginal(fit: &InlaFit, i: usize, x: &[f64]) -> Result<DensityTable> {
    if i >= fit.latent_dim() {
        return Err(Error::IndexOutOfRange { index: i, dim: fit.latent_dim() });
    }
    let parts = fit
        .configurations
        .iter()
        .map(|c| {
            let m = &c.marginals[i];
            Ok((c.point.weight, delta_parameterization(MomentTriple::new(m.mean, m.sd * m.sd, m.skewness))?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DensityTable::from_fn(x.to_vec(), |v| parts.iter().map(|(w, sn)| w * sn.pdf(v)).sum()))
}

/// Four density curves on a shared abscissa.
#[derive(Debug, Clone)]
pub struct CurveSet {
    pub x: Vec<f64>,
    pub reference: Vec<f64>,
    pub mean: Vec<f64>,
    pub skew: Vec<f64>,
    pub refined: Vec<f64>,
}

impl CurveSet {
    pub fn write_csv(&self, w: impl std::io::Write) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["x", "mcmc", "mean_corrected", "skew_corrected", "refined_marginal"])?;
        for k in 0..self.x.len() {
            wr.write_record([self.x[k], self.reference[k], self.mean[k], self.skew[k], self.refined[k]].map(|v| v.to_string()))?;
        }
        wr.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ComponentComparison {
    pub index: usize,
    pub name: String,
    /// Mixture skewness of the component.
    pub gamma: f64,
    pub kld_mean: f64,
    pub kld_skew: f64,
    #[serde(skip)]
    pub central: CurveSet,
    /// Window over the long tail, from the 0.95 (or 0.05) quantile outward.
    #[serde(skip)]
    pub tail: CurveSet,
}

fn curves(x: Vec<f64>, reference: &[f64], mean: &[f64], skew: &[f64], fit: &InlaFit, i: usize) -> Result<CurveSet> {
    Ok(CurveSet {
        reference: density_estimate(reference, &x, None)?.density,
        mean: density_estimate(mean, &x, None)?.density,
        skew: density_estimate(skew, &x, None)?.density,
        refined: refined_marginal(fit, i, &x)?.density,
        x,
    })
}

/// Compares mean- and skew-corrected draws of latent `i` with reference
/// draws, all as kernel density estimates on a grid spanning the central
/// window of the reference.
pub fn compare_component(fit: &InlaFit, i: usize, reference: &[f64], mean: &[f64], skew: &[f64]) -> Result<ComponentComparison> {
    let mix = Mixture::from_fit(fit)?;
    let m1 = mix.raw_moment(i, 1)?;
    let m2 = mix.raw_moment(i, 2)?;
    let m3 = mix.raw_moment(i, 3)?;
    let var = m2 - m1 * m1;
    let gamma = (m3 - 3.0 * m1 * m2 + 2.0 * m1 * m1 * m1) / var.powf(1.5);
    let r = sorted(reference);
    let x = quantile_grid(&r, CENTRAL_WINDOW.0, CENTRAL_WINDOW.1, COMPARISON_POINTS);
    let central = curves(x, reference, mean, skew, fit, i)?;
    let p = DensityTable { x: central.x.clone(), density: central.reference.clone() };
    let kld = |q: &[f64]| kld_1d(&p, &DensityTable { x: central.x.clone(), density: q.to_vec() });
    let kld_mean = kld(&central.mean)?;
    let kld_skew = kld(&central.skew)?;
    let tail_x = if gamma >= 0.0 {
        quantile_grid(&r, 0.95, CENTRAL_WINDOW.1, COMPARISON_POINTS)
    } else {
        quantile_grid(&r, CENTRAL_WINDOW.0, 0.05, COMPARISON_POINTS)
    };
    let tail = curves(tail_x, reference, mean, skew, fit, i)?;
    Ok(ComponentComparison { index: i, name: fit.latent_names[i].clone(), gamma, kld_mean, kld_skew, central, tail })
}

/// Outcome of the correction gate over a set of comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GateSummary {
    pub considered: usize,
    pub skew_wins: usize,
    pub win_fraction: f64,
    pub median_kld_skew: f64,
}

impl GateSummary {
    pub fn passes(&self, min_win_fraction: f64, max_median: f64) -> bool {
        self.considered > 0 && self.win_fraction >= min_win_fraction && self.median_kld_skew <= max_median
    }
}

/// Among components with `|γ| ≥ min_abs_gamma`: how often the skew
/// correction is at least as close as the mean correction, and the median
/// skew-corrected divergence.
pub fn gate(comparisons: &[ComponentComparison], min_abs_gamma: f64) -> GateSummary {
    let sel: Vec<&ComponentComparison> = comparisons.iter().filter(|c| c.gamma.abs() >= min_abs_gamma).collect();
    let wins = sel.iter().filter(|c| c.kld_skew <= c.kld_mean).count();
    let k = sorted(&sel.iter().map(|c| c.kld_skew).collect::<Vec<_>>());
    GateSummary {
        considered: sel.len(),
        skew_wins: wins,
        win_fraction: if sel.is_empty() { 0.0 } else { wins as f64 / sel.len() as f64 },
        median_kld_skew: if k.is_empty() { f64::NAN } else { quantile_sorted(&k, 0.5) },
    }
}

pub fn write_report_csv(comparisons: &[ComponentComparison], w: impl std::io::Write) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["index", "name", "gamma", "kld_mean", "kld_skew"])?;
    for c in comparisons {
        wr.write_record([c.index.to_string(), c.name.clone(), c.gamma.to_string(), c.kld_mean.to_string(), c.kld_skew.to_string()])?;
    }
    wr.flush()?;
    Ok(())
}

/// `KLD(marginal ∥ KDE of draws)` on the marginal's central window.
pub fn kld_marginal_vs_draws(marginal: &Marginal1d, draws: &[f64]) -> Result<f64> {
    let p = &marginal.params;
    let x = DensityTable::grid(p.quantile(CENTRAL_WINDOW.0)?, p.quantile(CENTRAL_WINDOW.1)?, COMPARISON_POINTS);
    let exact = DensityTable::from_fn(x.clone(), |v| p.pdf(v));
    kld_1d(&exact, &density_estimate(draws, &x, None)?)
}
