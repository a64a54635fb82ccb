//! Skew Gaussian copula for one hyperparameter configuration.
//!
//! The copula keeps the correlation structure of the Gaussian
//! approximation `N(μ, Q*⁻¹)` and replaces each marginal by a skew normal
//! with mean `μ̃_i`, sd `σ_i` (the Gaussian marginal sd) and skewness
//! `γ_i`. Coordinate `i` maps as
//!
//! ```text
//! x̃_i = μ̃_i + σ_i · g_{γ_i}((x_i − μ_i) / σ_i),    g_γ(z) = F̃_γ⁻¹(Φ(z)),
//! ```
//!
//! where `F̃_γ` is the standardized skew-normal cdf.
//!
//! The log-density uses the back-transformed point centred on `μ`, and the
//! Jacobian term `δ_i = f̃(u)/φ(Φ⁻¹(F̃(u)))` with the normal density in the
//! denominator.

use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inla::{GaussianApprox, MarginalRefinement};
use crate::precision::{ConstraintCorrection, Factor, LinearConstraint, PrecisionMatrix};
use crate::rng;
use crate::skewnormal::{quantile_table, QuantileTable, SkewNormal, MAX_SKEWNESS};
use crate::special::{norm_quantile, norm_quantile_upper, LN_SQRT_2PI};

/// Probabilities handed to `Φ⁻¹` are clipped to `[CDF_CLIP, 1 − CDF_CLIP]`.
pub const CDF_CLIP: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CorrectionKind {
    /// The plain Gaussian approximation.
    None,
    /// Shift every marginal from `μ_i` to `μ̃_i`.
    #[default]
    Mean,
    /// Full skew-normal marginal map.
    Skew,
}

impl CorrectionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Mean => "mean",
            Self::Skew => "skew",
        }
    }
}

impl std::fmt::Display for CorrectionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CorrectionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "mean" => Ok(Self::Mean),
            "skew" => Ok(Self::Skew),
            _ => Err(Error::InvalidSpec(format!("unknown correction kind '{s}' (expected none, mean or skew)"))),
        }
    }
}

/// How the forward skewness map is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MapMode {
    /// Tabulated interpolants; skewness rounded to the table grid.
    #[default]
    Fast,
    /// Root finding for every element.
    Direct,
}

#[derive(Debug)]
pub struct FullConditionalSgc {
    mu: DVector<f64>,
    sigma: DVector<f64>,
    mu_tilde: DVector<f64>,
    gamma: DVector<f64>,
    factor: Factor,
    constraint: Option<LinearConstraint>,
    mode: MapMode,
    /// Per coordinate: skew normal for the effective skewness, `None` when
    /// the effective skewness is zero.
    marginals: Vec<Option<SkewNormal>>,
    table_index: Vec<usize>,
    effective: Vec<f64>,
    clips: AtomicUsize,
}

impl Clone for FullConditionalSgc {
    fn clone(&self) -> Self {
        Self {
            mu: self.mu.clone(),
            sigma: self.sigma.clone(),
            mu_tilde: self.mu_tilde.clone(),
            gamma: self.gamma.clone(),
            factor: self.factor.clone(),
            constraint: self.constraint.clone(),
            mode: self.mode,
            marginals: self.marginals.clone(),
            table_index: self.table_index.clone(),
            effective: self.effective.clone(),
            clips: AtomicUsize::new(self.clips.load(Ordering::Relaxed)),
        }
    }
}

impl FullConditionalSgc {
    /// Copula of a Gaussian approximation and its refined marginals.
    pub fn new(ga: &GaussianApprox, refinements: &[MarginalRefinement]) -> Result<Self> {
        let n = ga.dim();
        if refinements.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: refinements.len() });
        }
        let sigma = ga.marginal_sds();
        for (i, r) in refinements.iter().enumerate() {
            if r.index != i {
                return Err(Error::InvalidSpec(format!("refinement {i} is for component {}", r.index)));
            }
            if (r.sd - sigma[i]).abs() > 1e-9 * sigma[i] {
                return Err(Error::InvalidSpec(format!("refined sd {} differs from Gaussian sd {} at {i}", r.sd, sigma[i])));
            }
        }
        let mu_tilde = DVector::from_iterator(n, refinements.iter().map(|r| r.mean));
        let gamma = DVector::from_iterator(n, refinements.iter().map(|r| r.skewness));
        Self::build(ga.mode.clone(), sigma, mu_tilde, gamma, ga.factor().clone(), ga.constraint().cloned(), MapMode::Fast)
    }

    /// Copula from explicit parts; `σ` is taken from `Q*⁻¹`.
    pub fn from_parts(mu: DVector<f64>, q_star: &PrecisionMatrix, mu_tilde: DVector<f64>, gamma: DVector<f64>) -> Result<Self> {
        let factor = q_star.factorize()?;
        let cov = factor.covariance();
        let sigma = DVector::from_fn(cov.nrows(), |i, _| cov[(i, i)].sqrt());
        Self::build(mu, sigma, mu_tilde, gamma, factor, None, MapMode::Fast)
    }

    fn build(
        mu: DVector<f64>,
        sigma: DVector<f64>,
        mu_tilde: DVector<f64>,
        gamma: DVector<f64>,
        factor: Factor,
        constraint: Option<LinearConstraint>,
        mode: MapMode,
    ) -> Result<Self> {
        let n = factor.dim();
        for len in [mu.len(), sigma.len(), mu_tilde.len(), gamma.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, got: len });
            }
        }
        if let Some(&g) = gamma.iter().find(|g| !(g.abs() < MAX_SKEWNESS)) {
            return Err(Error::SkewnessOutOfRange(g));
        }
        if sigma.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidSpec("marginal sd must be positive".into()));
        }
        let mut sgc = Self {
            mu,
            sigma,
            mu_tilde,
            gamma,
            factor,
            constraint,
            mode,
            marginals: Vec::new(),
            table_index: Vec::new(),
            effective: Vec::new(),
            clips: AtomicUsize::new(0),
        };
        sgc.set_mode(mode)?;
        Ok(sgc)
    }

    /// Switches between tabulated and direct evaluation of the forward map.
    pub fn with_mode(mut self, mode: MapMode) -> Result<Self> {
        self.set_mode(mode)?;
        Ok(self)
    }

    fn set_mode(&mut self, mode: MapMode) -> Result<()> {
        let table = quantile_table();
        let mut marginals = Vec::with_capacity(self.dim());
        let mut index = Vec::with_capacity(self.dim());
        let mut effective = Vec::with_capacity(self.dim());
        for &g in self.gamma.iter() {
            let eff = match mode {
                MapMode::Fast => {
                    let k = table.lookup(g)?;
                    index.push(k);
                    table.gamma_at(k)
                }
                MapMode::Direct => g,
            };
            effective.push(eff);
            marginals.push(if eff == 0.0 { None } else { Some(SkewNormal::standardized(eff)?) });
        }
        self.mode = mode;
        self.marginals = marginals;
        self.table_index = index;
        self.effective = effective;
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mode(&self) -> MapMode {
        self.mode
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn sigma(&self) -> &DVector<f64> {
        &self.sigma
    }

    pub fn mu_tilde(&self) -> &DVector<f64> {
        &self.mu_tilde
    }

    pub fn gamma(&self) -> &DVector<f64> {
        &self.gamma
    }

    /// Skewness actually applied by the maps (rounded in fast mode).
    pub fn effective_gamma(&self, i: usize) -> f64 {
        self.effective[i]
    }

    pub fn factor(&self) -> &Factor {
        &self.factor
    }

    /// Number of probabilities clipped before `Φ⁻¹` so far.
    pub fn clip_count(&self) -> usize {
        self.clips.load(Ordering::Relaxed)
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: len });
        }
        Ok(())
    }

    #[inline]
    fn map_coordinate(&self, table: &QuantileTable, i: usize, x: f64) -> f64 {
        match &self.marginals[i] {
            None => x + (self.mu_tilde[i] - self.mu[i]),
            Some(sn) => {
                let z = (x - self.mu[i]) / self.sigma[i];
                let g = match self.mode {
                    MapMode::Fast => table.map_at(self.table_index[i], z),
                    MapMode::Direct => sn.quantile_of_normal_score(z),
                };
                self.mu_tilde[i] + self.sigma[i] * g
            }
        }
    }

    pub fn forward_transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x.len())?;
        if let Some(v) = x.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite latent value {v}")));
        }
        let table = quantile_table();
        Ok((0..x.len()).map(|i| self.map_coordinate(table, i, x[i])).collect())
    }

    /// `z = Φ⁻¹(F̃(u))` and `ln f̃(u) − ln φ(z)`, computed on the tail of `u`
    /// with the smaller probability.
    fn normal_score(&self, sn: &SkewNormal, u: f64) -> Result<(f64, f64)> {
        let upper = u > 0.0;
        let mut p = if upper { sn.sf(u) } else { sn.cdf(u) };
        if !(p > 0.0) || !p.is_finite() {
            return Err(Error::BoundaryEvaluation(u));
        }
        if p < CDF_CLIP {
            self.clips.fetch_add(1, Ordering::Relaxed);
            p = CDF_CLIP;
        }
        let z = if upper { norm_quantile_upper(p) } else { norm_quantile(p) };
        let log_delta = sn.ln_pdf(u) - (-0.5 * z * z - LN_SQRT_2PI);
        Ok((z, log_delta))
    }

    pub fn inverse_transform(&self, xt: &[f64]) -> Result<Vec<f64>> {
        self.check_len(xt.len())?;
        (0..xt.len())
            .map(|i| {
                if !xt[i].is_finite() {
                    return Err(Error::Domain(format!("non-finite value {}", xt[i])));
                }
                match &self.marginals[i] {
                    None => Ok(xt[i] - (self.mu_tilde[i] - self.mu[i])),
                    Some(sn) => {
                        let u = (xt[i] - self.mu_tilde[i]) / self.sigma[i];
                        let (z, _) = self.normal_score(sn, u)?;
                        Ok(self.mu[i] + self.sigma[i] * z)
                    }
                }
            })
            .collect()
    }

    /// Back-transformed deviations `t_i = x_i − μ_i` and `Σ log δ_i`.
    fn centred_and_log_jacobian(&self, xt: &[f64]) -> Result<(DVector<f64>, f64)> {
        self.check_len(xt.len())?;
        let mut t = DVector::zeros(xt.len());
        let mut log_jac = 0.0;
        for i in 0..xt.len() {
            match &self.marginals[i] {
                None => t[i] = xt[i] - self.mu_tilde[i],
                Some(sn) => {
                    let u = (xt[i] - self.mu_tilde[i]) / self.sigma[i];
                    let (z, ld) = self.normal_score(sn, u)?;
                    t[i] = self.sigma[i] * z;
                    log_jac += ld;
                }
            }
        }
        Ok((t, log_jac))
    }

    /// `δ_i = ∂x_i/∂x̃_i` for every coordinate.
    pub fn jacobian_terms(&self, xt: &[f64]) -> Result<Vec<f64>> {
        self.check_len(xt.len())?;
        (0..xt.len())
            .map(|i| match &self.marginals[i] {
                None => Ok(1.0),
                Some(sn) => {
                    let u = (xt[i] - self.mu_tilde[i]) / self.sigma[i];
                    Ok(self.normal_score(sn, u)?.1.exp())
                }
            })
            .collect()
    }

    fn gaussian_constant(&self) -> f64 {
        -(self.dim() as f64) * LN_SQRT_2PI + 0.5 * self.factor.log_det()
    }

    pub fn log_density(&self, xt: &[f64]) -> Result<f64> {
        let (t, log_jac) = self.centred_and_log_jacobian(xt)?;
        Ok(self.gaussian_constant() - 0.5 * self.factor.quad_form(&t) + log_jac)
    }

    /// `log N(x; μ̃, Q*⁻¹)`.
    pub fn log_density_improved_gaussian(&self, x: &[f64]) -> Result<f64> {
        self.check_len(x.len())?;
        let d = DVector::from_column_slice(x) - &self.mu_tilde;
        Ok(self.gaussian_constant() - 0.5 * self.factor.quad_form(&d))
    }

    /// `log N(x; μ, Q*⁻¹)`.
    pub fn log_density_gaussian(&self, x: &[f64]) -> Result<f64> {
        self.check_len(x.len())?;
        let d = DVector::from_column_slice(x) - &self.mu;
        Ok(self.gaussian_constant() - 0.5 * self.factor.quad_form(&d))
    }

    /// Log-density gap between the Gaussian and copula approximations at `μ`.
    pub fn correction_delta(&self) -> Result<f64> {
        let (t, log_jac) = self.centred_and_log_jacobian(self.mu.as_slice())?;
        Ok(0.5 * self.factor.quad_form(&t) - log_jac)
    }

    /// Applies the marginal maps for `kind` to every row of `draws`.
    pub fn transform_rows(&self, draws: &mut DMatrix<f64>, kind: CorrectionKind) -> Result<()> {
        self.check_len(draws.ncols())?;
        let table = quantile_table();
        for i in 0..draws.ncols() {
            let mut col = draws.column_mut(i);
            match kind {
                CorrectionKind::None => {}
                CorrectionKind::Mean => {
                    let shift = self.mu_tilde[i] - self.mu[i];
                    col.iter_mut().for_each(|v| *v += shift);
                }
                CorrectionKind::Skew => col.iter_mut().for_each(|v| *v = self.map_coordinate(table, i, *v)),
            }
        }
        Ok(())
    }

    /// Gaussian draws for `config`: blocks of [`rng::BLOCK_ROWS`] rows, block
    /// `b` from stream `block_stream(config, b)`.
    pub(crate) fn gaussian_draws(&self, count: usize, seed: u64, config: usize) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let correction = match &self.constraint {
            Some(con) => Some(ConstraintCorrection::new(&self.factor, con)?),
            None => None,
        };
        let blocks = count.div_ceil(rng::BLOCK_ROWS);
        let parts: Vec<DMatrix<f64>> = (0..blocks)
            .into_par_iter()
            .map(|b| {
                let rows = rng::BLOCK_ROWS.min(count - b * rng::BLOCK_ROWS);
                let mut r = rng::stream(seed, rng::block_stream(config, b));
                let mut d = self.factor.sample_with(&self.mu, rows, &mut r);
                if let Some(c) = &correction {
                    c.apply_rows(&mut d);
                }
                d
            })
            .collect();
        let mut out = DMatrix::zeros(count, n);
        for (b, p) in parts.iter().enumerate() {
            out.view_mut((b * rng::BLOCK_ROWS, 0), (p.nrows(), n)).copy_from(p);
        }
        Ok(out)
    }

    pub(crate) fn sample_config(&self, kind: CorrectionKind, count: usize, seed: u64, config: usize) -> Result<DMatrix<f64>> {
        let mut d = self.gaussian_draws(count, seed, config)?;
        self.transform_rows(&mut d, kind)?;
        Ok(d)
    }

    /// `count × N` draws from the corrected full conditional.
    pub fn sample_full_conditional(&self, kind: CorrectionKind, count: usize, seed: u64) -> Result<DMatrix<f64>> {
        self.sample_config(kind, count, seed, 0)
    }
}
