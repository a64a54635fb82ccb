use nalgebra::{DMatrix, DVector};

use super::gaussian::{newton, GaussianApprox, NewtonOptions};
use crate::error::{Error, Result};
use crate::model::LatentModel;
use crate::precision::{Factor, LinearConstraint};

/// Largest |γ| kept after moment matching.
pub const SKEWNESS_CLAMP: f64 = 0.99;

/// Nodes are placed at `μ_i ± j σ_i · span / half_nodes`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineOptions {
    pub half_nodes: usize,
    pub span: f64,
    pub newton: NewtonOptions,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self { half_nodes: 4, span: 3.5, newton: NewtonOptions::default() }
    }
}

/// Skew-normal summary `(μ̃_i, σ_i, γ_i)` of one latent marginal at one θ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginalRefinement {
    pub index: usize,
    /// Corrected mean μ̃_i.
    pub mean: f64,
    /// Gaussian-approximation sd σ_i.
    pub sd: f64,
    pub skewness: f64,
    /// Whether |γ| hit [`SKEWNESS_CLAMP`].
    pub clamped: bool,
    pub dropped_nodes: usize,
}

impl MarginalRefinement {
    /// Untouched Gaussian marginal.
    pub fn gaussian(index: usize, mean: f64, sd: f64) -> Self {
        Self { index, mean, sd, skewness: 0.0, clamped: false, dropped_nodes: 0 }
    }
}

/// Natural cubic spline, continued linearly beyond the end nodes.
struct NaturalSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl NaturalSpline {
    fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        let n = x.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // Tridiagonal system for interior second derivatives.
            let mut diag = vec![0.0; n];
            let mut rhs = vec![0.0; n];
            let mut upper = vec![0.0; n];
            for i in 1..n - 1 {
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                diag[i] = 2.0 * (h0 + h1);
                upper[i] = h1;
                rhs[i] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
                if i > 1 {
                    let w = h0 / diag[i - 1];
                    diag[i] -= w * upper[i - 1];
                    rhs[i] -= w * rhs[i - 1];
                }
            }
            for i in (1..n - 1).rev() {
                let next = if i + 1 < n - 1 { upper[i] * m[i + 1] } else { 0.0 };
                m[i] = (rhs[i] - next) / diag[i];
            }
        }
        Self { x, y, m }
    }

    fn end_slope(&self, right: bool) -> f64 {
        let n = self.x.len();
        let (i, j) = if right { (n - 2, n - 1) } else { (0, 1) };
        let h = self.x[j] - self.x[i];
        let secant = (self.y[j] - self.y[i]) / h;
        if right {
            secant + h * (self.m[i] + 2.0 * self.m[j]) / 6.0
        } else {
            secant - h * (2.0 * self.m[i] + self.m[j]) / 6.0
        }
    }

    fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t <= self.x[0] {
            return self.y[0] + self.end_slope(false) * (t - self.x[0]);
        }
        if t >= self.x[n - 1] {
            return self.y[n - 1] + self.end_slope(true) * (t - self.x[n - 1]);
        }
        let j = self.x.partition_point(|&v| v <= t).clamp(1, n - 1) - 1;
        let h = self.x[j + 1] - self.x[j];
        let a = (self.x[j + 1] - t) / h;
        let b = (t - self.x[j]) / h;
        a * self.y[j] + b * self.y[j + 1] + ((a * a * a - a) * self.m[j] + (b * b * b - b) * self.m[j + 1]) * h * h / 6.0
    }
}

/// Moments `(E z, Var z, skewness)` of the density `∝ exp(−z²/2 + r(z))`
/// where `r` interpolates `(z_j, r_j)`.
fn spline_moments(z: &[f64], r: &[f64]) -> (f64, f64, f64) {
    let spline = NaturalSpline::new(z.to_vec(), r.to_vec());
    let (lo, hi, steps) = (-9.0, 9.0, 7200);
    let h = (hi - lo) / steps as f64;
    let logd: Vec<f64> = (0..=steps)
        .map(|k| {
            let t = lo + k as f64 * h;
            -0.5 * t * t + spline.eval(t)
        })
        .collect();
    let top = logd.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut s = [0.0; 4];
    for (k, l) in logd.iter().enumerate() {
        let t = lo + k as f64 * h;
        let w = if k == 0 || k == steps { 0.5 } else { 1.0 } * (l - top).exp();
        s[0] += w;
        s[1] += w * t;
        s[2] += w * t * t;
        s[3] += w * t * t * t;
    }
    let m1 = s[1] / s[0];
    let m2 = s[2] / s[0];
    let m3 = s[3] / s[0];
    let var = m2 - m1 * m1;
    let c3 = m3 - 3.0 * m1 * m2 + 2.0 * m1 * m1 * m1;
    (m1, var, c3 / var.powf(1.5))
}

fn stack_constraint(base: Option<&LinearConstraint>, index: usize, value: f64, n: usize) -> Result<LinearConstraint> {
    let k = base.map_or(0, |c| c.rows());
    let mut c = DMatrix::zeros(k + 1, n);
    let mut e = DVector::zeros(k + 1);
    if let Some(b) = base {
        c.view_mut((0, 0), (k, n)).copy_from(b.matrix());
        e.rows_mut(0, k).copy_from(b.rhs());
    }
    c[(k, index)] = 1.0;
    e[k] = value;
    LinearConstraint::new(c, e)
}

fn log_det_constraint(factor: &Factor, con: &LinearConstraint) -> Result<f64> {
    let s = con.matrix() * factor.solve_matrix(&con.matrix().transpose());
    let chol = s.cholesky().ok_or(Error::RankDeficientConstraint)?;
    Ok(2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>())
}

/// Laplace approximation of `π(x_i | θ, y)` on a symmetric grid, moment
/// matched to a skew normal.
///
/// At each node `x_i = v` the conditional mode `x*_{−i}` is found by Newton
/// (warm-started at the Gaussian conditional mean) and the node's log
/// density is `−½x*ᵀQx* + Σℓ(x*) − ½log|Q*_{−i,−i}(x*)|`. The deviation
/// from the Gaussian log density in `z = (v − μ_i)/σ_i` is interpolated by
/// a natural cubic spline and the moments of the resulting density give
/// `μ̃_i = μ_i + σ_i E[z]` and `γ_i`. The returned sd is the Gaussian
/// approximation's.
pub fn refine_marginal(model: &dyn LatentModel, ga: &GaussianApprox, i: usize) -> Result<MarginalRefinement> {
    refine_marginal_with(model, ga, i, &RefineOptions::default())
}

pub fn refine_marginal_with(model: &dyn LatentModel, ga: &GaussianApprox, i: usize, opts: &RefineOptions) -> Result<MarginalRefinement> {
    let n = ga.dim();
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, dim: n });
    }
    let mu = ga.mode[i];
    let sd = ga.marginal_sd(i);
    if !(sd > 0.0) || !sd.is_finite() {
        return Ok(MarginalRefinement::gaussian(i, mu, sd));
    }
    let theta = &ga.theta;
    let q = model.prior_precision(theta)?;
    let cov = ga.covariance();
    let g = opts.half_nodes as isize;
    let step = opts.span / opts.half_nodes as f64;
    let mut z_ok = Vec::new();
    let mut l_ok = Vec::new();
    for j in -g..=g {
        let z = j as f64 * step;
        let v = mu + z * sd;
        let start = &ga.mode + cov.column(i) * ((v - mu) / cov[(i, i)]);
        let con = stack_constraint(ga.constraint(), i, v, n)?;
        let value = newton(model, theta, &q, Some(&con), start, &opts.newton).and_then(|sol| {
            if !sol.converged {
                return Err(Error::NoConvergence { iterations: sol.iterations, gradient: sol.gradient_norm });
            }
            let x = sol.x.as_slice();
            Ok(-0.5 * model.prior_quad_form(theta, x)? + model.loglik_sum(x)
                - 0.5 * sol.factor.log_det()
                - 0.5 * log_det_constraint(&sol.factor, &con)?)
        });
        match value {
            Ok(l) if l.is_finite() => {
                z_ok.push(z);
                l_ok.push(l);
            }
            Ok(_) | Err(_) => log::debug!("refinement node z={z} dropped for latent {i}"),
        }
    }
    let total = 2 * opts.half_nodes + 1;
    let dropped = total - z_ok.len();
    if dropped * 5 > total {
        log::warn!("refinement of latent {i} dropped {dropped} of {total} nodes");
    }
    if z_ok.len() < 3 {
        return Err(Error::RefinementFailure { index: i, dropped, total });
    }
    let r: Vec<f64> = z_ok.iter().zip(&l_ok).map(|(z, l)| l + 0.5 * z * z).collect();
    let r0 = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let r: Vec<f64> = r.iter().map(|v| v - r0).collect();
    let (m1, _var, skew) = spline_moments(&z_ok, &r);
    let clamped = skew.abs() > SKEWNESS_CLAMP;
    Ok(MarginalRefinement {
        index: i,
        mean: mu + sd * m1,
        sd,
        skewness: skew.clamp(-SKEWNESS_CLAMP, SKEWNESS_CLAMP),
        clamped,
        dropped_nodes: dropped,
    })
}
