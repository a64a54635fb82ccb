use std::collections::{BTreeMap, VecDeque};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::gaussian::{gaussian_approximation_from, log_hyper_posterior_from, GaussianApprox, NewtonOptions};
use crate::error::{Error, Result};
use crate::model::LatentModel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptions {
    /// Step in standardized coordinates.
    pub dz: f64,
    /// Largest log-density drop from the mode kept in the grid.
    pub drop_max: f64,
    /// Limit on |j| per axis.
    pub max_steps: usize,
    pub newton: NewtonOptions,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self { dz: 0.75, drop_max: 2.5, max_steps: 30, newton: NewtonOptions::default() }
    }
}

/// One hyperparameter configuration with its normalized weight.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub theta: Vec<f64>,
    pub log_posterior: f64,
    pub weight: f64,
}

/// Grid points with the Gaussian approximation at each.
#[derive(Debug, Clone)]
pub struct HyperGrid {
    pub points: Vec<GridPoint>,
    pub approximations: Vec<GaussianApprox>,
    pub mode: Vec<f64>,
    /// Negative Hessian of `log π(θ|y)` at the mode.
    pub neg_hessian: DMatrix<f64>,
}

struct Evaluator<'a> {
    model: &'a dyn LatentModel,
    newton: NewtonOptions,
    warm: Option<DVector<f64>>,
}

impl Evaluator<'_> {
    fn eval(&mut self, theta: &[f64]) -> Result<(f64, GaussianApprox)> {
        let ga = gaussian_approximation_from(self.model, theta, self.warm.as_ref(), &self.newton)?;
        if !ga.converged {
            return Err(Error::NoConvergence { iterations: ga.iterations, gradient: ga.gradient_norm });
        }
        let lp = log_hyper_posterior_from(self.model, &ga)?;
        self.warm = Some(ga.mode.clone());
        Ok((lp, ga))
    }

    fn value(&mut self, theta: &[f64]) -> f64 {
        match self.eval(theta) {
            Ok((lp, _)) if lp.is_finite() => lp,
            _ => f64::NEG_INFINITY,
        }
    }

    fn gradient(&mut self, theta: &[f64], h: f64) -> DVector<f64> {
        let d = theta.len();
        let mut g = DVector::zeros(d);
        let mut t = theta.to_vec();
        for k in 0..d {
            t[k] = theta[k] + h;
            let fp = self.value(&t);
            t[k] = theta[k] - h;
            let fm = self.value(&t);
            t[k] = theta[k];
            g[k] = (fp - fm) / (2.0 * h);
        }
        g
    }

    fn hessian(&mut self, theta: &[f64], f0: f64, h: f64) -> DMatrix<f64> {
        let d = theta.len();
        let mut hm = DMatrix::zeros(d, d);
        let mut t = theta.to_vec();
        for a in 0..d {
            t[a] = theta[a] + h;
            let fp = self.value(&t);
            t[a] = theta[a] - h;
            let fm = self.value(&t);
            t[a] = theta[a];
            hm[(a, a)] = (fp - 2.0 * f0 + fm) / (h * h);
            for b in 0..a {
                let mut s = 0.0;
                for (sa, sb, sign) in [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)] {
                    t[a] = theta[a] + sa * h;
                    t[b] = theta[b] + sb * h;
                    s += sign * self.value(&t);
                }
                t[a] = theta[a];
                t[b] = theta[b];
                hm[(a, b)] = s / (4.0 * h * h);
                hm[(b, a)] = hm[(a, b)];
            }
        }
        hm
    }
}

/// BFGS ascent of `log π(θ|y)` with finite-difference gradients.
fn find_mode(ev: &mut Evaluator, start: Vec<f64>) -> Result<(Vec<f64>, f64)> {
    let d = start.len();
    let h = 1e-4;
    let mut x = DVector::from_vec(start);
    let mut f = ev.value(x.as_slice());
    if !f.is_finite() {
        return Err(Error::ModeSearchFailure(format!("log posterior not finite at start {:?}", x.as_slice())));
    }
    let mut g = ev.gradient(x.as_slice(), h);
    let mut hinv = DMatrix::identity(d, d);
    for _ in 0..200 {
        if g.amax() < 1e-4 {
            return Ok((x.as_slice().to_vec(), f));
        }
        let mut p = &hinv * &g;
        if p.dot(&g) <= 0.0 {
            hinv = DMatrix::identity(d, d);
            p = g.clone();
        }
        // Keep individual moves modest on the log-precision scale.
        let pmax = p.amax();
        if pmax > 2.0 {
            p *= 2.0 / pmax;
        }
        let mut s = 1.0;
        let mut moved = false;
        for _ in 0..30 {
            let cand = &x + &p * s;
            let fc = ev.value(cand.as_slice());
            if fc.is_finite() && fc >= f + 1e-4 * s * p.dot(&g) {
                let gc = ev.gradient(cand.as_slice(), h);
                let sk = &cand - &x;
                let yk = &g - &gc;
                let sy = sk.dot(&yk);
                if sy > 1e-12 {
                    let rho = 1.0 / sy;
                    let i = DMatrix::<f64>::identity(d, d);
                    let a = &i - &sk * yk.transpose() * rho;
                    hinv = &a * &hinv * a.transpose() + &sk * sk.transpose() * rho;
                }
                x = cand;
                f = fc;
                g = gc;
                moved = true;
                break;
            }
            s *= 0.5;
        }
        if !moved {
            if g.amax() < 1e-2 {
                return Ok((x.as_slice().to_vec(), f));
            }
            return Err(Error::ModeSearchFailure(format!("line search stalled at {:?} (gradient {:e})", x.as_slice(), g.amax())));
        }
    }
    Err(Error::ModeSearchFailure("no convergence in 200 BFGS iterations".into()))
}

/// Explores `log π(θ|y)` on a regular grid in standardized coordinates
/// around its mode and returns normalized integration weights.
pub fn explore_grid(model: &dyn LatentModel) -> Result<HyperGrid> {
    explore_grid_with(model, &GridOptions::default())
}

pub fn explore_grid_with(model: &dyn LatentModel, opts: &GridOptions) -> Result<HyperGrid> {
    let d = model.hyper_dim();
    if d > 2 {
        return Err(Error::InvalidSpec(format!("grid exploration supports at most 2 hyperparameters, got {d}")));
    }
    let mut ev = Evaluator { model, newton: opts.newton, warm: None };
    if d == 0 {
        let (lp, ga) = ev.eval(&[])?;
        return Ok(HyperGrid {
            points: vec![GridPoint { theta: Vec::new(), log_posterior: lp, weight: 1.0 }],
            approximations: vec![ga],
            mode: Vec::new(),
            neg_hessian: DMatrix::zeros(0, 0),
        });
    }
    let (mode, f_mode) = find_mode(&mut ev, model.hyper_start())?;
    let neg_h = -ev.hessian(&mode, f_mode, 1e-2);
    let eig = SymmetricEigen::new(neg_h.clone());
    if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::ModeSearchFailure(format!("Hessian at mode {mode:?} is not negative definite")));
    }
    // θ(z) = θ* + V Λ^{-1/2} z
    let scale = &eig.eigenvectors * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    let theta_of = |j: &[i64]| -> Vec<f64> {
        let z = DVector::from_iterator(d, j.iter().map(|&v| v as f64 * opts.dz));
        let t = DVector::from_column_slice(&mode) + &scale * z;
        t.as_slice().to_vec()
    };

    let mut visited: BTreeMap<Vec<i64>, Option<(f64, GaussianApprox)>> = BTreeMap::new();
    let mut queue = VecDeque::from([vec![0i64; d]]);
    let mut lp_max = f64::NEG_INFINITY;
    while let Some(j) = queue.pop_front() {
        if visited.contains_key(&j) {
            continue;
        }
        let theta = theta_of(&j);
        let res = ev.eval(&theta).ok().filter(|(lp, _)| lp.is_finite());
        let keep = match &res {
            Some((lp, _)) => f_mode.max(lp_max) - lp <= opts.drop_max,
            None => false,
        };
        if let Some((lp, _)) = &res {
            lp_max = lp_max.max(*lp);
        }
        visited.insert(j.clone(), if keep { res } else { None });
        if !keep {
            continue;
        }
        for axis in 0..d {
            for delta in [-1i64, 1] {
                let mut nb = j.clone();
                nb[axis] += delta;
                if nb[axis].unsigned_abs() as usize <= opts.max_steps && !visited.contains_key(&nb) {
                    queue.push_back(nb);
                }
            }
        }
    }
    let top = f_mode.max(lp_max);
    let mut kept: Vec<(Vec<i64>, f64, GaussianApprox)> = visited
        .into_iter()
        .filter_map(|(j, r)| r.map(|(lp, ga)| (j, lp, ga)))
        .filter(|(_, lp, _)| top - lp <= opts.drop_max)
        .collect();
    if kept.is_empty() {
        return Err(Error::ModeSearchFailure("no grid point within the drop threshold".into()));
    }
    kept.sort_by(|a, b| a.0.cmp(&b.0));
    let total: f64 = kept.iter().map(|(_, lp, _)| (lp - top).exp()).sum();
    let mut points = Vec::with_capacity(kept.len());
    let mut approximations = Vec::with_capacity(kept.len());
    for (_, lp, ga) in kept {
        points.push(GridPoint { theta: ga.theta.clone(), log_posterior: lp, weight: (lp - top).exp() / total });
        approximations.push(ga);
    }
    Ok(HyperGrid { points, approximations, mode, neg_hessian: neg_h })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Family, FixedPrecisionModel, Observation};
    use crate::precision::PrecisionMatrix;

    /// y_i ~ N(x_i, 1), x_i ~ N(0, 1/τ), θ = log τ with a Gamma(a, b) prior.
    /// The marginal π(θ | y) is available in closed form.
    struct ConjugateModel {
        obs: Vec<Observation>,
        y: Vec<f64>,
        a: f64,
        b: f64,
    }

    impl LatentModel for ConjugateModel {
        fn latent_dim(&self) -> usize {
            self.y.len()
        }
        fn hyper_dim(&self) -> usize {
            1
        }
        fn latent_names(&self) -> Vec<String> {
            (0..self.y.len()).map(|i| format!("x{i}")).collect()
        }
        fn hyper_names(&self) -> Vec<String> {
            vec!["theta".into()]
        }
        fn family(&self) -> Family {
            Family::Gaussian { precision: 1.0 }
        }
        fn observations(&self) -> &[Observation] {
            &self.obs
        }
        fn constraint(&self) -> Option<&crate::precision::LinearConstraint> {
            None
        }
        fn prior_precision(&self, theta: &[f64]) -> Result<PrecisionMatrix> {
            Ok(PrecisionMatrix::from_diagonal(&vec![theta[0].exp(); self.y.len()]))
        }
        fn log_hyper_prior(&self, theta: &[f64]) -> f64 {
            crate::model::log_gamma_prior_on_log_precision(theta[0], self.a, self.b)
        }
        fn hyper_start(&self) -> Vec<f64> {
            vec![0.0]
        }
    }

    fn exact_log_posterior(m: &ConjugateModel, theta: f64) -> f64 {
        // y_i ~ N(0, 1 + 1/τ) marginally.
        let v = 1.0 + (-theta).exp();
        m.log_hyper_prior(&[theta]) + m.y.iter().map(|y| -0.5 * v.ln() - 0.5 * y * y / v).sum::<f64>()
    }

    fn conjugate() -> ConjugateModel {
        let y: Vec<f64> = (0..40).map(|i| ((i * 37 % 23) as f64 - 11.0) / 5.0).collect();
        let obs = (0..y.len()).map(|i| Observation { index: i, y: y[i], trials: 1.0 }).collect();
        ConjugateModel { obs, y, a: 2.0, b: 1.0 }
    }

    #[test]
    fn zero_dimensional_grid() {
        let model = FixedPrecisionModel::new(
            PrecisionMatrix::identity(2),
            Family::Poisson,
            vec![Observation { index: 0, y: 1.0, trials: 1.0 }],
        )
        .unwrap();
        let g = explore_grid(&model).unwrap();
        assert_eq!(g.points.len(), 1);
        assert_eq!(g.points[0].weight, 1.0);
    }

    #[test]
    fn laplace_is_exact_for_conjugate_model() {
        let m = conjugate();
        let base = exact_log_posterior(&m, 0.0) - super::super::gaussian::log_hyper_posterior(&m, &[0.0]).unwrap();
        for t in [-1.0, 0.5, 1.7] {
            let lp = super::super::gaussian::log_hyper_posterior(&m, &[t]).unwrap();
            assert!((exact_log_posterior(&m, t) - lp - base).abs() < 1e-8);
        }
    }

    #[test]
    fn grid_mean_matches_exact_posterior_mean() {
        let m = conjugate();
        let g = explore_grid(&m).unwrap();
        let sum: f64 = g.points.iter().map(|p| p.weight).sum();
        assert!((sum - 1.0).abs() < 1e-12);
        let top = g.points.iter().map(|p| p.log_posterior).fold(f64::NEG_INFINITY, f64::max);
        assert!(g.points.iter().all(|p| top - p.log_posterior <= 2.5));
        assert!((5..=25).contains(&g.points.len()), "K={}", g.points.len());
        // Exact mean and sd of θ by quadrature.
        let h = 1e-3;
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        let ref_lp = exact_log_posterior(&m, g.mode[0]);
        for k in -20_000..=20_000 {
            let t = g.mode[0] + k as f64 * h;
            let w = (exact_log_posterior(&m, t) - ref_lp).exp();
            s0 += w;
            s1 += w * t;
            s2 += w * t * t;
        }
        let mean = s1 / s0;
        let sd = (s2 / s0 - mean * mean).sqrt();
        let grid_mean: f64 = g.points.iter().map(|p| p.weight * p.theta[0]).sum();
        assert!((grid_mean - mean).abs() < 0.05 * sd, "grid {grid_mean} exact {mean} sd {sd}");
    }
}
