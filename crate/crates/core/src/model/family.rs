use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Observation likelihood, a function of the linear predictor η.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Family {
    /// Normal response with known precision, identity link.
    Gaussian { precision: f64 },
    /// Counts, log link.
    Poisson,
    /// Successes out of `trials`, logit link.
    Binomial,
}

/// `ℓ(y | η)` and its first three derivatives in η.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LogLikDerivs {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

fn ln_factorial(k: f64) -> f64 {
    libm::lgamma(k + 1.0)
}

/// `log(1 + eˣ)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Gaussian { .. } => "gaussian",
            Family::Poisson => "poisson",
            Family::Binomial => "binomial",
        }
    }

    pub fn check_response(&self, y: f64, trials: f64) -> Result<()> {
        if !y.is_finite() {
            return Err(Error::Domain(format!("non-finite response {y}")));
        }
        match self {
            Family::Gaussian { precision } => {
                if !(*precision > 0.0) {
                    return Err(Error::Domain(format!("gaussian precision must be positive, got {precision}")));
                }
            }
            Family::Poisson => {
                if y < 0.0 || y.fract() != 0.0 {
                    return Err(Error::Domain(format!("poisson response must be a non-negative integer, got {y}")));
                }
            }
            Family::Binomial => {
                if trials < 1.0 || trials.fract() != 0.0 {
                    return Err(Error::Domain(format!("binomial trials must be a positive integer, got {trials}")));
                }
                if y < 0.0 || y > trials || y.fract() != 0.0 {
                    return Err(Error::Domain(format!("binomial response {y} outside 0..={trials}")));
                }
            }
        }
        Ok(())
    }

    /// Log-likelihood only.
    pub fn loglik(&self, y: f64, trials: f64, eta: f64) -> f64 {
        match *self {
            Family::Gaussian { precision } => {
                let r = y - eta;
                0.5 * precision.ln() - crate::special::LN_SQRT_2PI - 0.5 * precision * r * r
            }
            Family::Poisson => y * eta - eta.exp() - ln_factorial(y),
            Family::Binomial => {
                y * eta - trials * softplus(eta) + ln_factorial(trials) - ln_factorial(y) - ln_factorial(trials - y)
            }
        }
    }

    /// Closed-form derivatives up to `max_order` (1..=3); higher orders are
    /// left at zero.
    pub fn derivs(&self, y: f64, trials: f64, eta: f64, max_order: u8) -> LogLikDerivs {
        let value = self.loglik(y, trials, eta);
        let (d1, d2, d3) = match *self {
            Family::Gaussian { precision } => (precision * (y - eta), -precision, 0.0),
            Family::Poisson => {
                let mu = eta.exp();
                (y - mu, -mu, -mu)
            }
            Family::Binomial => {
                let p = logistic(eta);
                let v = p * (1.0 - p);
                (y - trials * p, -trials * v, -trials * v * (1.0 - 2.0 * p))
            }
        };
        LogLikDerivs {
            value,
            d1: if max_order >= 1 { d1 } else { 0.0 },
            d2: if max_order >= 2 { d2 } else { 0.0 },
            d3: if max_order >= 3 { d3 } else { 0.0 },
        }
    }

    /// Validating entry point: checks `(y, trials)` and `η` before evaluating.
    pub fn loglik_and_derivs(&self, y: f64, trials: f64, eta: f64, max_order: u8) -> Result<LogLikDerivs> {
        if !(1..=3).contains(&max_order) {
            return Err(Error::Domain(format!("derivative order {max_order} not in 1..=3")));
        }
        if !eta.is_finite() {
            return Err(Error::Domain(format!("non-finite linear predictor {eta}")));
        }
        self.check_response(y, trials)?;
        Ok(self.derivs(y, trials, eta, max_order))
    }
}
