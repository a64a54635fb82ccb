use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::LatentModel;
use crate::precision::{ConstraintCorrection, Factor, LinearConstraint, PrecisionMatrix};

/// Newton–Raphson controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub max_iterations: usize,
    /// Convergence threshold on the ∞-norm of the (projected) gradient.
    pub gradient_tolerance: f64,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { max_iterations: 50, gradient_tolerance: 1e-6, max_halvings: 10 }
    }
}

/// Result of maximizing `−½xᵀQx + Σℓ(y_i | x_i)` subject to optional
/// linear equality constraints.
#[derive(Debug, Clone)]
pub(crate) struct NewtonSolution {
    pub x: DVector<f64>,
    pub c: DVector<f64>,
    pub factor: Factor,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
}

fn loglik_terms(model: &dyn LatentModel, x: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let n = x.len();
    let mut d1 = DVector::zeros(n);
    let mut c = DVector::zeros(n);
    let f = model.family();
    for o in model.observations() {
        let d = f.derivs(o.y, o.trials, x[o.index], 2);
        d1[o.index] += d.d1;
        c[o.index] -= d.d2;
    }
    (d1, c)
}

/// Projection onto the null space of `C` in the Euclidean metric.
struct NullSpaceProjector {
    c: DMatrix<f64>,
    cct_inv: DMatrix<f64>,
}

impl NullSpaceProjector {
    fn new(con: &LinearConstraint) -> Result<Self> {
        let c = con.matrix().clone();
        let cct = &c * c.transpose();
        let cct_inv = cct.cholesky().ok_or(Error::RankDeficientConstraint)?.inverse();
        Ok(Self { c, cct_inv })
    }

    fn apply(&self, g: &DVector<f64>) -> DVector<f64> {
        g - self.c.transpose() * (&self.cct_inv * (&self.c * g))
    }
}

pub(crate) fn log_density(model: &dyn LatentModel, theta: &[f64], x: &DVector<f64>) -> Result<f64> {
    Ok(-0.5 * model.prior_quad_form(theta, x.as_slice())? + model.loglik_sum(x.as_slice()))
}

/// Damped Newton iteration started at `start`, which must satisfy the
/// constraint if one is given.
pub(crate) fn newton(
    model: &dyn LatentModel,
    theta: &[f64],
    q: &PrecisionMatrix,
    con: Option<&LinearConstraint>,
    start: DVector<f64>,
    opts: &NewtonOptions,
) -> Result<NewtonSolution> {
    let projector = con.map(NullSpaceProjector::new).transpose()?;
    let gradient = |x: &DVector<f64>, d1: &DVector<f64>| -> f64 {
        let g = d1 - q.matrix() * x;
        let g = match &projector {
            Some(p) => p.apply(&g),
            None => g,
        };
        g.amax()
    };
    let mut x = start;
    let mut f_old = log_density(model, theta, &x)?;
    let (mut d1, mut c) = loglik_terms(model, &x);
    let mut grad = gradient(&x, &d1);
    let mut iterations = 0;
    let mut converged = grad <= opts.gradient_tolerance;
    while !converged && iterations < opts.max_iterations {
        iterations += 1;
        let factor = q.add_diagonal(c.as_slice()).factorize()?;
        let b = &d1 + c.component_mul(&x);
        let mut target = factor.solve(&b);
        if let Some(con) = con {
            target = ConstraintCorrection::new(&factor, con)?.apply(&target);
        }
        let step = target - &x;
        let tol = 1e-9 * (1.0 + f_old.abs());
        let mut s = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let cand = &x + &step * s;
            let f_new = log_density(model, theta, &cand)?;
            if f_new.is_finite() && f_new >= f_old - tol {
                accepted = Some((cand, f_new));
                break;
            }
            s *= 0.5;
        }
        let Some((cand, f_new)) = accepted else {
            break;
        };
        x = cand;
        f_old = f_new;
        (d1, c) = loglik_terms(model, &x);
        grad = gradient(&x, &d1);
        converged = grad <= opts.gradient_tolerance;
    }
    let factor = q.add_diagonal(c.as_slice()).factorize()?;
    Ok(NewtonSolution { x, c, factor, converged, iterations, gradient_norm: grad })
}

/// Gaussian approximation `N(μ(θ), Q*(θ)⁻¹)` of the latent full
/// conditional, with `Q* = Q(θ) + diag(c(θ))` built at the mode. With a
/// constraint the approximation is conditioned on `Cx = e`.
#[derive(Debug, Clone)]
pub struct GaussianApprox {
    pub theta: Vec<f64>,
    pub mode: DVector<f64>,
    pub c: DVector<f64>,
    pub q_star: PrecisionMatrix,
    pub log_det_q_star: f64,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    factor: Factor,
    covariance: DMatrix<f64>,
    constraint: Option<LinearConstraint>,
}

impl GaussianApprox {
    pub(crate) fn from_solution(theta: &[f64], q: &PrecisionMatrix, sol: NewtonSolution, con: Option<&LinearConstraint>) -> Result<Self> {
        let q_star = q.add_diagonal(sol.c.as_slice());
        let mut covariance = sol.factor.covariance();
        if let Some(con) = con {
            covariance = ConstraintCorrection::new(&sol.factor, con)?.constrained_covariance(&covariance);
        }
        Ok(Self {
            theta: theta.to_vec(),
            mode: sol.x,
            c: sol.c,
            q_star,
            log_det_q_star: sol.factor.log_det(),
            converged: sol.converged,
            iterations: sol.iterations,
            gradient_norm: sol.gradient_norm,
            factor: sol.factor,
            covariance,
            constraint: con.cloned(),
        })
    }

    /// Rebuilds an approximation from a stored mode and curvature vector.
    pub fn from_parts(model: &dyn LatentModel, theta: &[f64], mode: DVector<f64>, c: DVector<f64>, converged: bool, iterations: usize) -> Result<Self> {
        let n = model.latent_dim();
        if mode.len() != n || c.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: mode.len().min(c.len()) });
        }
        let q = model.prior_precision(theta)?;
        let factor = q.add_diagonal(c.as_slice()).factorize()?;
        let sol = NewtonSolution { x: mode, c, factor, converged, iterations, gradient_norm: f64::NAN };
        Self::from_solution(theta, &q, sol, model.constraint())
    }

    pub fn dim(&self) -> usize {
        self.mode.len()
    }

    pub fn factor(&self) -> &Factor {
        &self.factor
    }

    pub fn constraint(&self) -> Option<&LinearConstraint> {
        self.constraint.as_ref()
    }

    /// `Q*⁻¹`, conditioned on the constraint when there is one.
    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn marginal_sd(&self, i: usize) -> f64 {
        self.covariance[(i, i)].max(0.0).sqrt()
    }

    pub fn marginal_sds(&self) -> DVector<f64> {
        DVector::from_fn(self.dim(), |i, _| self.marginal_sd(i))
    }
}

pub fn gaussian_approximation(model: &dyn LatentModel, theta: &[f64]) -> Result<GaussianApprox> {
    gaussian_approximation_from(model, theta, None, &NewtonOptions::default())
}

/// Gaussian approximation with an optional warm start. Non-convergence is
/// reported through [`GaussianApprox::converged`], not as an error.
pub fn gaussian_approximation_from(
    model: &dyn LatentModel,
    theta: &[f64],
    start: Option<&DVector<f64>>,
    opts: &NewtonOptions,
) -> Result<GaussianApprox> {
    if theta.len() != model.hyper_dim() {
        return Err(Error::DimensionMismatch { expected: model.hyper_dim(), got: theta.len() });
    }
    let n = model.latent_dim();
    let q = model.prior_precision(theta)?;
    let con = model.constraint();
    let mut x0 = match start {
        Some(s) if s.len() == n => s.clone(),
        Some(s) => return Err(Error::DimensionMismatch { expected: n, got: s.len() }),
        None => DVector::zeros(n),
    };
    if let Some(con) = con {
        x0 = ConstraintCorrection::new(&q.factorize()?, con)?.apply(&x0);
    }
    let sol = newton(model, theta, &q, con, x0, opts)?;
    if !sol.converged {
        log::warn!(
            "Newton iteration did not converge at theta={theta:?} after {} iterations (gradient {:e})",
            sol.iterations,
            sol.gradient_norm
        );
    }
    GaussianApprox::from_solution(theta, &q, sol, con)
}

/// `log|C Q⁻¹ Cᵀ|` and `eᵀ(C Q⁻¹ Cᵀ)⁻¹e`.
fn constraint_terms(factor: &Factor, con: &LinearConstraint) -> Result<(f64, f64)> {
    let w = factor.solve_matrix(&con.matrix().transpose());
    let s = con.matrix() * w;
    let chol = s.cholesky().ok_or(Error::RankDeficientConstraint)?;
    let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let quad = con.rhs().dot(&chol.solve(con.rhs()));
    Ok((log_det, quad))
}

/// Laplace approximation of `log π(θ | y)` up to a θ-free constant,
/// evaluated from a Gaussian approximation at θ:
///
/// `log π(θ) + ½log|Q| − ½x*ᵀQx* + Σℓ(x*) − ½log|Q*|`
///
/// With a constraint `Cx = e` the prior and the approximation are both
/// conditioned, adding `½log|CQ⁻¹Cᵀ| + ½eᵀ(CQ⁻¹Cᵀ)⁻¹e − ½log|CQ*⁻¹Cᵀ|`.
pub fn log_hyper_posterior_from(model: &dyn LatentModel, ga: &GaussianApprox) -> Result<f64> {
    let theta = &ga.theta;
    let x = ga.mode.as_slice();
    let mut lp = model.log_hyper_prior(theta) + 0.5 * model.prior_log_det(theta)? - 0.5 * model.prior_quad_form(theta, x)?
        + model.loglik_sum(x)
        - 0.5 * ga.log_det_q_star;
    if let Some(con) = model.constraint() {
        let q = model.prior_precision(theta)?;
        let (ld_prior, quad_prior) = constraint_terms(&q.factorize()?, con)?;
        let (ld_post, _) = constraint_terms(&ga.factor, con)?;
        lp += 0.5 * ld_prior + 0.5 * quad_prior - 0.5 * ld_post;
    }
    Ok(lp)
}

pub fn log_hyper_posterior(model: &dyn LatentModel, theta: &[f64]) -> Result<f64> {
    let ga = gaussian_approximation(model, theta)?;
    if !ga.converged {
        return Err(Error::NoConvergence { iterations: ga.iterations, gradient: ga.gradient_norm });
    }
    log_hyper_posterior_from(model, &ga)
}
