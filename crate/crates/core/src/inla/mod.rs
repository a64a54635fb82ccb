//! Nested Laplace pipeline: Gaussian approximation of the latent full
//! conditional, Laplace approximation of the hyperparameter posterior on a
//! grid, and skew-normal refinement of each latent marginal.

mod gaussian;
mod grid;
mod refine;

pub use gaussian::{
    gaussian_approximation, gaussian_approximation_from, log_hyper_posterior, log_hyper_posterior_from, GaussianApprox,
    NewtonOptions,
};
pub use grid::{explore_grid, explore_grid_with, GridOptions, GridPoint, HyperGrid};
pub use refine::{refine_marginal, refine_marginal_with, MarginalRefinement, RefineOptions, SKEWNESS_CLAMP};

use rayon::prelude::*;

use crate::error::Result;
use crate::model::LatentModel;

/// A grid point, its Gaussian approximation and refined marginals.
#[derive(Debug, Clone)]
pub struct Configuration {
    pub point: GridPoint,
    pub ga: GaussianApprox,
    pub marginals: Vec<MarginalRefinement>,
}

impl Configuration {
    pub fn corrected_means(&self) -> Vec<f64> {
        self.marginals.iter().map(|m| m.mean).collect()
    }

    pub fn skewness(&self) -> Vec<f64> {
        self.marginals.iter().map(|m| m.skewness).collect()
    }
}

/// Everything downstream consumers need from a fitted model.
#[derive(Debug, Clone)]
pub struct InlaFit {
    pub latent_names: Vec<String>,
    pub hyper_names: Vec<String>,
    pub hyper_mode: Vec<f64>,
    pub configurations: Vec<Configuration>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FitOptions {
    pub grid: GridOptions,
    pub refine: RefineOptions,
}

impl InlaFit {
    pub fn latent_dim(&self) -> usize {
        self.latent_names.len()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.configurations.iter().map(|c| c.point.weight).collect()
    }

    pub fn all_converged(&self) -> bool {
        self.configurations.iter().all(|c| c.ga.converged)
    }

    pub fn clamp_count(&self) -> usize {
        self.configurations.iter().flat_map(|c| &c.marginals).filter(|m| m.clamped).count()
    }
}

pub fn fit(model: &dyn LatentModel) -> Result<InlaFit> {
    fit_with(model, &FitOptions::default())
}

/// Runs grid exploration, then refines every latent marginal at every grid
/// point. Refinements run in parallel; results are ordered by
/// (configuration, latent index).
pub fn fit_with(model: &dyn LatentModel, opts: &FitOptions) -> Result<InlaFit> {
    let grid = explore_grid_with(model, &opts.grid)?;
    let n = model.latent_dim();
    let jobs: Vec<(usize, usize)> = (0..grid.points.len()).flat_map(|k| (0..n).map(move |i| (k, i))).collect();
    let refined: Vec<MarginalRefinement> = jobs
        .par_iter()
        .map(|&(k, i)| refine_marginal_with(model, &grid.approximations[k], i, &opts.refine))
        .collect::<Result<_>>()?;
    let mut refined = refined.into_iter();
    let configurations = grid
        .points
        .into_iter()
        .zip(grid.approximations)
        .map(|(point, ga)| Configuration { point, ga, marginals: refined.by_ref().take(n).collect() })
        .collect();
    Ok(InlaFit {
        latent_names: model.latent_names(),
        hyper_names: model.hyper_names(),
        hyper_mode: grid.mode,
        configurations,
    })
}
