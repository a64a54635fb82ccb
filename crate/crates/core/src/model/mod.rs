//! Likelihood families, the latent-field layout and prior precision assembly.

mod config;
mod family;
mod simulate;
mod spec;

pub use config::{load_config, parse_config, ModelConfig};
pub use family::{Family, LogLikDerivs};
pub use simulate::{simulate_glmm, GlmmSimulation};
pub use spec::{
    assemble_precision, log_gamma_prior_on_log_precision, ConstraintRow, GlmmModel, ModelSpec, Priors,
    DEFAULT_PREDICTOR_PRECISION,
};

use crate::error::{Error, Result};
use crate::precision::{LinearConstraint, PrecisionMatrix};

/// A single observation attached to latent component `index`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub index: usize,
    pub y: f64,
    pub trials: f64,
}

/// Anything the inference engine can fit: a centred Gaussian prior on the
/// latent field with precision `Q(θ)`, conditionally independent
/// observations on some latent components, and a prior on `θ`.
pub trait LatentModel: Sync {
    fn latent_dim(&self) -> usize;
    fn hyper_dim(&self) -> usize;
    fn latent_names(&self) -> Vec<String>;
    fn hyper_names(&self) -> Vec<String>;
    fn family(&self) -> Family;
    fn observations(&self) -> &[Observation];
    fn constraint(&self) -> Option<&LinearConstraint>;
    fn prior_precision(&self, theta: &[f64]) -> Result<PrecisionMatrix>;
    fn log_hyper_prior(&self, theta: &[f64]) -> f64;
    /// Starting point for the hyperparameter mode search.
    fn hyper_start(&self) -> Vec<f64>;

    /// `xᵀ Q(θ) x`.
    fn prior_quad_form(&self, theta: &[f64], x: &[f64]) -> Result<f64> {
        let q = self.prior_precision(theta)?;
        let v = nalgebra::DVector::from_column_slice(x);
        Ok(v.dot(&(q.matrix() * &v)))
    }

    /// `log |Q(θ)|`.
    fn prior_log_det(&self, theta: &[f64]) -> Result<f64> {
        Ok(self.prior_precision(theta)?.factorize()?.log_det())
    }

    fn loglik_sum(&self, x: &[f64]) -> f64 {
        let f = self.family();
        self.observations().iter().map(|o| f.loglik(o.y, o.trials, x[o.index])).sum()
    }
}

/// Latent model with a fixed prior precision and no hyperparameters.
#[derive(Debug, Clone)]
pub struct FixedPrecisionModel {
    precision: PrecisionMatrix,
    family: Family,
    observations: Vec<Observation>,
    constraint: Option<LinearConstraint>,
}

impl FixedPrecisionModel {
    pub fn new(precision: PrecisionMatrix, family: Family, observations: Vec<Observation>) -> Result<Self> {
        let n = precision.dim();
        for o in &observations {
            if o.index >= n {
                return Err(Error::IndexOutOfRange { index: o.index, dim: n });
            }
            family.check_response(o.y, o.trials)?;
        }
        Ok(Self { precision, family, observations, constraint: None })
    }

    pub fn with_constraint(mut self, con: LinearConstraint) -> Result<Self> {
        if con.dim() != self.precision.dim() {
            return Err(Error::DimensionMismatch { expected: self.precision.dim(), got: con.dim() });
        }
        self.constraint = Some(con);
        Ok(self)
    }
}

impl LatentModel for FixedPrecisionModel {
    fn latent_dim(&self) -> usize {
        self.precision.dim()
    }

    fn hyper_dim(&self) -> usize {
        0
    }

    fn latent_names(&self) -> Vec<String> {
        (1..=self.latent_dim()).map(|i| format!("x[{i}]")).collect()
    }

    fn hyper_names(&self) -> Vec<String> {
        Vec::new()
    }

    fn family(&self) -> Family {
        self.family
    }

    fn observations(&self) -> &[Observation] {
        &self.observations
    }

    fn constraint(&self) -> Option<&LinearConstraint> {
        self.constraint.as_ref()
    }

    fn prior_precision(&self, _theta: &[f64]) -> Result<PrecisionMatrix> {
        Ok(self.precision.clone())
    }

    fn log_hyper_prior(&self, _theta: &[f64]) -> f64 {
        0.0
    }

    fn hyper_start(&self) -> Vec<f64> {
        Vec::new()
    }
}
