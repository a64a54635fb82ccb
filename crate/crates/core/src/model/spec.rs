use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::family::Family;
use super::{LatentModel, Observation};
use crate::error::{Error, Result};
use crate::precision::{LinearConstraint, PrecisionMatrix};

/// Default precision of the predictor noise ε, `exp(15)`.
pub const DEFAULT_PREDICTOR_PRECISION: f64 = 3_269_017.372_472_110_6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Priors {
    /// Precision of the N(0, 1/τ) prior on the intercept.
    pub intercept_precision: f64,
    /// One precision per covariate coefficient.
    pub fixed_precision: Vec<f64>,
    /// Shape `a` of the Gamma(a, b) prior on the random-effect precision.
    pub gamma_shape: f64,
    /// Rate `b` of the Gamma(a, b) prior on the random-effect precision.
    pub gamma_rate: f64,
    /// Precision τ_ε tying η to the additive predictor.
    pub predictor_precision: f64,
}

impl Priors {
    pub fn with_covariates(n_covariates: usize) -> Self {
        Self {
            intercept_precision: 0.001,
            fixed_precision: vec![0.001; n_covariates],
            gamma_shape: 0.1,
            gamma_rate: 0.1,
            predictor_precision: DEFAULT_PREDICTOR_PRECISION,
        }
    }
}

/// One row `Σ_j coefficients[j] x_j = value` over the full latent vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintRow {
    pub coefficients: Vec<f64>,
    pub value: f64,
}

/// Generalized linear mixed model
/// `η_i = β₀ + Σ_j Z_ij β_j + u_{g(i)} + ε_i` with `u ~ N(0, τ_u⁻¹ I_m)`.
///
/// The latent vector is ordered `(η_1..η_n, β₀, β_1..β_{n_J}, u_1..u_m)`;
/// the intercept slot is absent when `intercept` is false. The only
/// hyperparameter is `θ = log τ_u`, present when the model has groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub y: Vec<f64>,
    /// Binomial trials; empty means all ones.
    #[serde(default)]
    pub trials: Vec<f64>,
    pub intercept: bool,
    #[serde(default)]
    pub covariate_names: Vec<String>,
    /// Covariate columns, each of length n.
    #[serde(default)]
    pub covariates: Vec<Vec<f64>>,
    /// Group label in `1..=n_groups` per observation; empty for no random effect.
    #[serde(default)]
    pub groups: Vec<usize>,
    #[serde(default)]
    pub n_groups: usize,
    pub priors: Priors,
    #[serde(default)]
    pub constraints: Vec<ConstraintRow>,
}

impl ModelSpec {
    /// Fixed-effects model with default priors.
    pub fn new(family: Family, y: Vec<f64>) -> Self {
        Self {
            family,
            y,
            trials: Vec::new(),
            intercept: true,
            covariate_names: Vec::new(),
            covariates: Vec::new(),
            groups: Vec::new(),
            n_groups: 0,
            priors: Priors::with_covariates(0),
            constraints: Vec::new(),
        }
    }

    pub fn with_covariate(mut self, name: &str, column: Vec<f64>) -> Self {
        self.covariate_names.push(name.to_string());
        self.covariates.push(column);
        self.priors.fixed_precision.push(0.001);
        self
    }

    pub fn with_groups(mut self, groups: Vec<usize>, n_groups: usize) -> Self {
        self.groups = groups;
        self.n_groups = n_groups;
        self
    }

    pub fn n_obs(&self) -> usize {
        self.y.len()
    }

    pub fn n_fixed(&self) -> usize {
        self.intercept as usize + self.covariates.len()
    }

    pub fn n_random(&self) -> usize {
        if self.groups.is_empty() { 0 } else { self.n_groups }
    }

    /// `n_P = n_J + intercept + m`.
    pub fn n_params(&self) -> usize {
        self.n_fixed() + self.n_random()
    }

    pub fn dim(&self) -> usize {
        self.n_obs() + self.n_params()
    }

    /// Latent index of the first fixed effect.
    pub fn fixed_offset(&self) -> usize {
        self.n_obs()
    }

    /// Latent index of `u_1`.
    pub fn random_offset(&self) -> usize {
        self.n_obs() + self.n_fixed()
    }

    pub fn trial(&self, i: usize) -> f64 {
        if self.trials.is_empty() { 1.0 } else { self.trials[i] }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_obs();
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if n == 0 {
            return bad("no observations".into());
        }
        if !self.trials.is_empty() && self.trials.len() != n {
            return bad(format!("{} trials for {n} responses", self.trials.len()));
        }
        if self.covariates.len() != self.covariate_names.len() {
            return bad("covariate names and columns differ in number".into());
        }
        for (name, col) in self.covariate_names.iter().zip(&self.covariates) {
            if col.len() != n {
                return bad(format!("covariate {name} has {} rows, expected {n}", col.len()));
            }
            if col.iter().any(|v| !v.is_finite()) {
                return bad(format!("covariate {name} has non-finite entries"));
            }
        }
        if self.priors.fixed_precision.len() != self.covariates.len() {
            return bad(format!(
                "{} fixed-effect precisions for {} covariates",
                self.priors.fixed_precision.len(),
                self.covariates.len()
            ));
        }
        if !self.groups.is_empty() {
            if self.groups.len() != n {
                return bad(format!("{} group labels for {n} responses", self.groups.len()));
            }
            if self.n_groups == 0 {
                return bad("group labels given but n_groups is 0".into());
            }
            if let Some(g) = self.groups.iter().find(|&&g| g < 1 || g > self.n_groups) {
                return bad(format!("group label {g} outside 1..={}", self.n_groups));
            }
            if !(self.priors.gamma_shape > 0.0 && self.priors.gamma_rate > 0.0) {
                return bad("gamma prior constants must be positive".into());
            }
        }
        let p = &self.priors;
        if !(p.predictor_precision > 0.0 && p.predictor_precision.is_finite()) {
            return bad("predictor precision must be positive".into());
        }
        if self.intercept && !(p.intercept_precision > 0.0) {
            return bad("intercept precision must be positive".into());
        }
        if p.fixed_precision.iter().any(|t| !(*t > 0.0)) {
            return bad("fixed-effect precisions must be positive".into());
        }
        for i in 0..n {
            self.family
                .check_response(self.y[i], self.trial(i))
                .map_err(|e| Error::InvalidSpec(format!("observation {}: {e}", i + 1)))?;
        }
        for (r, row) in self.constraints.iter().enumerate() {
            if row.coefficients.len() != self.dim() {
                return bad(format!(
                    "constraint {} has {} coefficients, latent dimension is {}",
                    r + 1,
                    row.coefficients.len(),
                    self.dim()
                ));
            }
        }
        Ok(())
    }

    /// Design row `D_i = (1, Z_i, G_i)` restricted to the nonzero params,
    /// as `(param offset, value)` pairs.
    pub(crate) fn design_row(&self, i: usize) -> Vec<(usize, f64)> {
        let mut row = Vec::with_capacity(self.n_fixed() + 1);
        let mut k = 0;
        if self.intercept {
            row.push((0, 1.0));
            k = 1;
        }
        for (j, col) in self.covariates.iter().enumerate() {
            row.push((k + j, col[i]));
        }
        if !self.groups.is_empty() {
            row.push((self.n_fixed() + self.groups[i] - 1, 1.0));
        }
        row
    }

    /// Dense n × n_P design `D`.
    pub fn design(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n_obs(), self.n_params());
        for i in 0..self.n_obs() {
            for (j, v) in self.design_row(i) {
                d[(i, j)] += v;
            }
        }
        d
    }

    /// Prior precisions of the parameter block at `θ` (diagonal of P).
    pub fn param_precisions(&self, theta: &[f64]) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        if self.intercept {
            p.push(self.priors.intercept_precision);
        }
        p.extend_from_slice(&self.priors.fixed_precision);
        if self.n_random() > 0 {
            let tau_u = theta[0].exp();
            p.extend(std::iter::repeat_n(tau_u, self.n_random()));
        }
        p
    }

    pub fn latent_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (1..=self.n_obs()).map(|i| format!("eta[{i}]")).collect();
        if self.intercept {
            names.push("(Intercept)".into());
        }
        names.extend(self.covariate_names.iter().cloned());
        names.extend((1..=self.n_random()).map(|j| format!("u[{j}]")));
        names
    }

    pub fn linear_constraint(&self) -> Result<Option<LinearConstraint>> {
        if self.constraints.is_empty() {
            return Ok(None);
        }
        let k = self.constraints.len();
        let n = self.dim();
        let c = DMatrix::from_fn(k, n, |r, j| self.constraints[r].coefficients[j]);
        let e = DVector::from_iterator(k, self.constraints.iter().map(|r| r.value));
        LinearConstraint::new(c, e).map(Some)
    }
}

/// Joint prior precision of `x = (η, β, u)`:
///
/// ```text
/// Q = [ τ_ε I_n     −τ_ε D        ]
///     [ −τ_ε Dᵀ     P + τ_ε DᵀD   ]
/// ```
///
/// with `P = diag(τ_β₀, τ_β, τ_u I_m)`.
pub fn assemble_precision(spec: &ModelSpec, theta: &[f64]) -> Result<PrecisionMatrix> {
    spec.validate()?;
    let d_expected = (spec.n_random() > 0) as usize;
    if theta.len() != d_expected {
        return Err(Error::InvalidSpec(format!(
            "expected {d_expected} hyperparameters, got {}",
            theta.len()
        )));
    }
    let n = spec.n_obs();
    let np = spec.n_params();
    let tau = spec.priors.predictor_precision;
    let mut q = DMatrix::zeros(n + np, n + np);
    for i in 0..n {
        q[(i, i)] = tau;
        let row = spec.design_row(i);
        for &(a, va) in &row {
            q[(i, n + a)] -= tau * va;
            q[(n + a, i)] -= tau * va;
            for &(b, vb) in &row {
                q[(n + a, n + b)] += tau * va * vb;
            }
        }
    }
    for (j, p) in spec.param_precisions(theta).into_iter().enumerate() {
        q[(n + j, n + j)] += p;
    }
    PrecisionMatrix::new(q)
}

/// Log of a Gamma(a, b) density on τ, expressed on `θ = log τ` (Jacobian included).
pub fn log_gamma_prior_on_log_precision(theta: f64, a: f64, b: f64) -> f64 {
    a * b.ln() - libm::lgamma(a) + a * theta - b * theta.exp()
}

/// A validated [`ModelSpec`] ready for inference.
#[derive(Debug, Clone)]
pub struct GlmmModel {
    spec: ModelSpec,
    observations: Vec<Observation>,
    constraint: Option<LinearConstraint>,
}

impl GlmmModel {
    pub fn new(spec: ModelSpec) -> Result<Self> {
        spec.validate()?;
        let observations = (0..spec.n_obs())
            .map(|i| Observation { index: i, y: spec.y[i], trials: spec.trial(i) })
            .collect();
        let constraint = spec.linear_constraint()?;
        Ok(Self { spec, observations, constraint })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }
}

impl LatentModel for GlmmModel {
    fn latent_dim(&self) -> usize {
        self.spec.dim()
    }

    fn hyper_dim(&self) -> usize {
        (self.spec.n_random() > 0) as usize
    }

    fn latent_names(&self) -> Vec<String> {
        self.spec.latent_names()
    }

    fn hyper_names(&self) -> Vec<String> {
        if self.hyper_dim() == 1 { vec!["log precision of u".into()] } else { Vec::new() }
    }

    fn family(&self) -> Family {
        self.spec.family
    }

    fn observations(&self) -> &[Observation] {
        &self.observations
    }

    fn constraint(&self) -> Option<&LinearConstraint> {
        self.constraint.as_ref()
    }

    fn prior_precision(&self, theta: &[f64]) -> Result<PrecisionMatrix> {
        assemble_precision(&self.spec, theta)
    }

    fn log_hyper_prior(&self, theta: &[f64]) -> f64 {
        if self.hyper_dim() == 0 {
            return 0.0;
        }
        log_gamma_prior_on_log_precision(theta[0], self.spec.priors.gamma_shape, self.spec.priors.gamma_rate)
    }

    fn hyper_start(&self) -> Vec<f64> {
        if self.hyper_dim() == 0 { Vec::new() } else { vec![0.0] }
    }

    /// `τ_ε ‖η − Dβ‖² + βᵀPβ`, which avoids the cancellation of the dense
    /// product when τ_ε is large.
    fn prior_quad_form(&self, theta: &[f64], x: &[f64]) -> Result<f64> {
        let s = &self.spec;
        if x.len() != s.dim() {
            return Err(Error::DimensionMismatch { expected: s.dim(), got: x.len() });
        }
        let n = s.n_obs();
        let beta = &x[n..];
        let mut acc = 0.0;
        for i in 0..n {
            let pred: f64 = s.design_row(i).iter().map(|&(j, v)| v * beta[j]).sum();
            let r = x[i] - pred;
            acc += r * r;
        }
        acc *= s.priors.predictor_precision;
        for (b, p) in beta.iter().zip(s.param_precisions(theta)) {
            acc += p * b * b;
        }
        Ok(acc)
    }

    /// `|Q| = τ_ε^n |P|` because the Schur complement of the η block is P.
    fn prior_log_det(&self, theta: &[f64]) -> Result<f64> {
        let s = &self.spec;
        Ok(s.n_obs() as f64 * s.priors.predictor_precision.ln()
            + s.param_precisions(theta).iter().map(|p| p.ln()).sum::<f64>())
    }
}
