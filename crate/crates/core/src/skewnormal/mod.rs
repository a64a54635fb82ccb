//! Skew-normal distribution: moment parameterization, pdf/cdf/quantile and
//! the standardized correction map `g_γ(z) = F̃⁻¹(Φ(z))`.

mod interp;
mod table;

pub use interp::CubicHermite;
pub use table::{fast_map, install_quantile_table, quantile_table, QuantileTable, GAMMA_GRID_LEN, Z_MAX};

use std::f64::consts::{FRAC_2_PI, LN_2, PI};

use crate::error::{Error, Result};
use crate::special::{norm_cdf, norm_pdf, norm_sf, owens_t, skew_normal_thin_tail, LN_SQRT_2PI};

/// Supremum of |skewness| over the skew-normal family,
/// `√2 (4 − π) / (π − 2)^{3/2}`.
pub const MAX_SKEWNESS: f64 = 0.995_271_746_431_156_5;

/// Below this the closed-form tail probability is replaced by quadrature.
const THIN_TAIL: f64 = 1e-4;

/// Mean, variance and skewness of a univariate distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentTriple {
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
}

impl MomentTriple {
    pub fn new(mean: f64, variance: f64, skewness: f64) -> Self {
        Self { mean, variance, skewness }
    }
}

/// `SN(ξ, ω, α)` with density `(2/ω) φ((x−ξ)/ω) Φ(α(x−ξ)/ω)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewNormal {
    pub xi: f64,
    pub omega: f64,
    pub alpha: f64,
}

/// Maps `(μ, σ², γ)` to the skew normal with exactly those moments.
pub fn delta_parameterization(m: MomentTriple) -> Result<SkewNormal> {
    if !(m.variance > 0.0 && m.variance.is_finite()) || !m.mean.is_finite() {
        return Err(Error::Domain(format!("variance must be positive, got {}", m.variance)));
    }
    let g = m.skewness;
    if !(g.abs() < MAX_SKEWNESS) {
        return Err(Error::SkewnessOutOfRange(g));
    }
    let g23 = g.abs().powf(2.0 / 3.0);
    let c = ((4.0 - PI) / 2.0).powf(2.0 / 3.0);
    let delta = g.signum() * (PI / 2.0 * g23 / (c + g23)).sqrt();
    let delta = if g == 0.0 { 0.0 } else { delta };
    let alpha = delta / (1.0 - delta * delta).sqrt();
    let omega = (PI * m.variance / (PI - 2.0 * delta * delta)).sqrt();
    let xi = m.mean - omega * delta * FRAC_2_PI.sqrt();
    Ok(SkewNormal { xi, omega, alpha })
}

/// `ln Φ(t)`, accurate far into the lower tail.
fn ln_norm_cdf(t: f64) -> f64 {
    if t > -30.0 {
        norm_cdf(t).ln()
    } else {
        let r = 1.0 / (t * t);
        -0.5 * t * t - (-t).ln() - LN_SQRT_2PI + (1.0 - r + 3.0 * r * r - 15.0 * r * r * r).ln()
    }
}

impl SkewNormal {
    pub fn new(xi: f64, omega: f64, alpha: f64) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) || !xi.is_finite() || alpha.is_nan() {
            return Err(Error::Domain(format!("invalid skew-normal parameters ({xi}, {omega}, {alpha})")));
        }
        Ok(Self { xi, omega, alpha })
    }

    pub fn from_moments(m: MomentTriple) -> Result<Self> {
        delta_parameterization(m)
    }

    /// Zero-mean, unit-variance skew normal with skewness `gamma`.
    pub fn standardized(gamma: f64) -> Result<Self> {
        delta_parameterization(MomentTriple::new(0.0, 1.0, gamma))
    }

    pub fn delta(&self) -> f64 {
        if self.alpha.is_infinite() {
            self.alpha.signum()
        } else {
            self.alpha / (1.0 + self.alpha * self.alpha).sqrt()
        }
    }

    pub fn mean(&self) -> f64 {
        self.xi + self.omega * self.delta() * FRAC_2_PI.sqrt()
    }

    pub fn variance(&self) -> f64 {
        let d = self.delta();
        self.omega * self.omega * (1.0 - FRAC_2_PI * d * d)
    }

    pub fn skewness(&self) -> f64 {
        let b = self.delta() * FRAC_2_PI.sqrt();
        (4.0 - PI) / 2.0 * b * b * b / (1.0 - b * b).powf(1.5)
    }

    pub fn moments(&self) -> MomentTriple {
        MomentTriple::new(self.mean(), self.variance(), self.skewness())
    }

    fn z(&self, x: f64) -> f64 {
        (x - self.xi) / self.omega
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let u = self.z(x);
        2.0 / self.omega * norm_pdf(u) * norm_cdf(self.alpha * u)
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        let u = self.z(x);
        LN_2 - self.omega.ln() - LN_SQRT_2PI - 0.5 * u * u + ln_norm_cdf(self.alpha * u)
    }

    /// `d ln pdf / dx`, finite wherever `ln_pdf` is.
    pub fn ln_pdf_derivative(&self, x: f64) -> f64 {
        let u = self.z(x);
        let t = self.alpha * u;
        let mills = (-0.5 * t * t - LN_SQRT_2PI - ln_norm_cdf(t)).exp();
        (-u + self.alpha * mills) / self.omega
    }

    /// Maximizer of the density, by bisection on the sign of the log-density
    /// slope, which is strictly decreasing.
    pub fn mode(&self) -> f64 {
        if self.alpha == 0.0 {
            return self.xi;
        }
        let m = self.mean();
        let (mut lo, mut hi) = (self.xi.min(m) - self.omega, self.xi.max(m) + self.omega);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.ln_pdf_derivative(mid) > 0.0 { lo = mid } else { hi = mid }
            if hi - lo <= 1e-14 * (self.omega + mid.abs()) {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// `d pdf / dx`.
    pub fn pdf_derivative(&self, x: f64) -> f64 {
        let u = self.z(x);
        let a = self.alpha;
        2.0 / (self.omega * self.omega) * norm_pdf(u) * (a * norm_pdf(a * u) - u * norm_cdf(a * u))
    }

    /// `F(x) = Φ(u) − 2T(u, α)`; the thin lower tail of a right-skewed
    /// density is integrated directly.
    pub fn cdf(&self, x: f64) -> f64 {
        let u = self.z(x);
        let v = (norm_cdf(u) - 2.0 * owens_t(u, self.alpha)).clamp(0.0, 1.0);
        if u < 0.0 && self.alpha > 0.0 && v < THIN_TAIL {
            return skew_normal_thin_tail(-u, self.alpha);
        }
        v
    }

    /// `1 − F(x) = Q(u) + 2T(u, α)`, with the same thin-tail treatment.
    pub fn sf(&self, x: f64) -> f64 {
        let u = self.z(x);
        let v = (norm_sf(u) + 2.0 * owens_t(u, self.alpha)).clamp(0.0, 1.0);
        if u > 0.0 && self.alpha < 0.0 && v < THIN_TAIL {
            return skew_normal_thin_tail(u, -self.alpha);
        }
        v
    }

    /// Cornish–Fisher starting point for the `z`-quantile.
    fn quantile_start(&self, z: f64) -> f64 {
        let g = self.skewness();
        self.mean() + self.variance().sqrt() * (z + (z * z - 1.0) * g / 6.0)
    }

    /// Solves `F(x) = p` (`upper == false`) or `1 − F(x) = p` (`upper == true`)
    /// by Newton on the log scale. Both `ln F` and `ln(1 − F)` are concave,
    /// so the iteration converges from any start; points already visited
    /// bracket the root and catch steps that leave it.
    fn solve_tail(&self, p: f64, upper: bool, start: f64) -> f64 {
        let target = p.ln();
        let tail = |x: f64| if upper { self.sf(x) } else { self.cdf(x) };
        // g is increasing in x for both branches after the sign flip.
        let g_of = |t: f64| if upper { target - t.ln() } else { t.ln() - target };
        let sd = self.variance().sqrt();
        let mut x = start;
        let mut t = tail(x);
        let mut gx = g_of(t);
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for _ in 0..200 {
            if gx == 0.0 {
                break;
            }
            if gx < 0.0 { lo = x } else { hi = x }
            let slope = self.pdf(x) / t;
            let mut next = x - gx / slope;
            if !next.is_finite() {
                next = if gx < 0.0 { x + sd } else { x - sd };
            }
            if next <= lo || next >= hi {
                next = if lo.is_finite() && hi.is_finite() {
                    0.5 * (lo + hi)
                } else if gx < 0.0 {
                    x + sd
                } else {
                    x - sd
                };
            }
            let dx = (next - x).abs();
            x = next;
            t = tail(x);
            gx = g_of(t);
            if dx <= 1e-13 * (sd + x.abs()) || hi - lo <= 1e-14 * (sd + x.abs()) {
                break;
            }
        }
        x
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("quantile level {p} outside (0, 1)")));
        }
        let z = crate::special::norm_quantile(p);
        Ok(if p <= 0.5 {
            self.solve_tail(p, false, self.quantile_start(z))
        } else {
            self.solve_tail(1.0 - p, true, self.quantile_start(z))
        })
    }

    /// `x` with `1 − F(x) = q`, accurate for tiny `q`.
    pub fn quantile_upper(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::Domain(format!("tail probability {q} outside (0, 1)")));
        }
        let z = crate::special::norm_quantile_upper(q);
        Ok(if q < 0.5 {
            self.solve_tail(q, true, self.quantile_start(z))
        } else {
            self.solve_tail(1.0 - q, false, self.quantile_start(z))
        })
    }

    /// `F⁻¹(Φ(z))`, solved on whichever tail of `z` keeps full relative
    /// precision.
    pub fn quantile_of_normal_score(&self, z: f64) -> f64 {
        let start = self.quantile_start(z);
        if z <= 0.0 {
            self.solve_tail(norm_cdf(z), false, start)
        } else {
            self.solve_tail(norm_sf(z), true, start)
        }
    }
}

pub fn sn_pdf(p: &SkewNormal, x: f64) -> f64 {
    p.pdf(x)
}

pub fn sn_cdf(p: &SkewNormal, x: f64) -> f64 {
    p.cdf(x)
}

pub fn sn_quantile(p: &SkewNormal, q: f64) -> Result<f64> {
    p.quantile(q)
}

/// `g_γ(z) = F̃⁻¹(Φ(z))` for the standardized skew normal with skewness γ,
/// by direct root finding.
pub fn standardized_map_direct(gamma: f64, z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::Domain(format!("non-finite normal score {z}")));
    }
    if gamma == 0.0 {
        return Ok(z);
    }
    Ok(SkewNormal::standardized(gamma)?.quantile_of_normal_score(z))
}
