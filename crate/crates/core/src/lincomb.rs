//! Sampling-free joint summaries of latent subsets and linear combinations.
//!
//! Each hyperparameter configuration contributes skew-normal marginals
//! `(μ̃_i, σ_i, γ_i)` and the Gaussian covariance `Σ*`. Non-central moments
//! are mixed over configurations; the covariance follows the law of total
//! covariance. Skewness of a linear combination propagates through the
//! per-component third central moments only.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inla::InlaFit;
use crate::sampler::SummaryRow;
use crate::skewnormal::{delta_parameterization, MomentTriple, SkewNormal, MAX_SKEWNESS};

/// Propagated skewness beyond this is clamped.
pub const LINCOMB_SKEWNESS_CLAMP: f64 = 0.99;

/// One configuration of a mixture.
#[derive(Debug, Clone)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub skewness: DVector<f64>,
}

/// Weighted mixture of skew-normal-marginal copulas.
#[derive(Debug, Clone)]
pub struct Mixture {
    pub names: Vec<String>,
    pub components: Vec<MixtureComponent>,
}

impl Mixture {
    pub fn new(names: Vec<String>, components: Vec<MixtureComponent>) -> Result<Self> {
        let n = names.len();
        if components.is_empty() {
            return Err(Error::InvalidSpec("mixture needs at least one component".into()));
        }
        for c in &components {
            for len in [c.mean.len(), c.cov.nrows(), c.cov.ncols(), c.skewness.len()] {
                if len != n {
                    return Err(Error::DimensionMismatch { expected: n, got: len });
                }
            }
        }
        Ok(Self { names, components })
    }

    pub fn from_fit(fit: &InlaFit) -> Result<Self> {
        let components = fit
            .configurations
            .iter()
            .map(|c| MixtureComponent {
                weight: c.point.weight,
                mean: DVector::from_vec(c.corrected_means()),
                cov: c.ga.covariance().clone(),
                skewness: DVector::from_vec(c.skewness()),
            })
            .collect();
        Self::new(fit.latent_names.clone(), components)
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    /// `Σ_k w_k E_k[x_iᵖ]` for `p ∈ {1, 2, 3}`, from the analytic skew-normal
    /// moments of every configuration.
    pub fn raw_moment(&self, i: usize, p: u32) -> Result<f64> {
        if i >= self.dim() {
            return Err(Error::IndexOutOfRange { index: i, dim: self.dim() });
        }
        Ok(self.components.iter().map(|c| c.weight * sn_raw_moment(c.mean[i], c.cov[(i, i)], c.skewness[i], p)).sum())
    }
}

/// `E[Xᵖ]` for `p ≤ 3` of a distribution with the given mean, variance and
/// skewness.
pub fn sn_raw_moment(mean: f64, variance: f64, skewness: f64, p: u32) -> f64 {
    match p {
        0 => 1.0,
        1 => mean,
        2 => variance + mean * mean,
        3 => skewness * variance.powf(1.5) + 3.0 * mean * variance + mean * mean * mean,
        _ => panic!("moment order {p} not supported"),
    }
}

/// Names, mean, covariance and skewness of a joint summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSgcSummary {
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
    pub skewness: Vec<f64>,
    /// Components whose skewness was clamped.
    #[serde(default)]
    pub clamped: Vec<bool>,
}

impl JointSgcSummary {
    pub fn new(names: Vec<String>, mean: DVector<f64>, cov: DMatrix<f64>, skewness: DVector<f64>) -> Result<Self> {
        let m = names.len();
        for len in [mean.len(), cov.nrows(), cov.ncols(), skewness.len()] {
            if len != m {
                return Err(Error::DimensionMismatch { expected: m, got: len });
            }
        }
        let mut clamped = vec![false; m];
        let mut skew = skewness.as_slice().to_vec();
        for (h, g) in skew.iter_mut().enumerate() {
            if !g.is_finite() {
                return Err(Error::SkewnessOutOfRange(*g));
            }
            if g.abs() > LINCOMB_SKEWNESS_CLAMP {
                log::warn!("skewness {g:.4} of '{}' clamped to ±{LINCOMB_SKEWNESS_CLAMP}", names[h]);
                *g = g.signum() * LINCOMB_SKEWNESS_CLAMP;
                clamped[h] = true;
            }
        }
        Ok(Self {
            mean: mean.as_slice().to_vec(),
            cov: (0..m).map(|r| (0..m).map(|c| cov[(r, c)]).collect()).collect(),
            skewness: skew,
            names,
            clamped,
        })
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn mean_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.mean)
    }

    pub fn cov_matrix(&self) -> DMatrix<f64> {
        let m = self.dim();
        DMatrix::from_fn(m, m, |r, c| self.cov[r][c])
    }

    pub fn sd(&self, h: usize) -> f64 {
        self.cov[h][h].sqrt()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text)?;
        let m = s.names.len();
        if s.mean.len() != m || s.skewness.len() != m || s.cov.len() != m || s.cov.iter().any(|r| r.len() != m) {
            return Err(Error::Format("summary fields have inconsistent lengths".into()));
        }
        Ok(s)
    }
}

/// Joint summary of the latent subset `subset`.
pub fn subset_moments(mix: &Mixture, subset: &[usize]) -> Result<JointSgcSummary> {
    if subset.is_empty() {
        return Err(Error::InvalidSpec("empty latent subset".into()));
    }
    let n = mix.dim();
    if let Some(&i) = subset.iter().find(|&&i| i >= n) {
        return Err(Error::IndexOutOfRange { index: i, dim: n });
    }
    let m = subset.len();
    if mix.components.len() == 1 {
        let c = &mix.components[0];
        let mean = DVector::from_iterator(m, subset.iter().map(|&i| c.mean[i]));
        let cov = DMatrix::from_fn(m, m, |r, s| c.cov[(subset[r], subset[s])]);
        let skew = DVector::from_iterator(m, subset.iter().map(|&i| c.skewness[i]));
        return JointSgcSummary::new(subset.iter().map(|&i| mix.names[i].clone()).collect(), mean, cov, skew);
    }
    let mut m1 = DVector::<f64>::zeros(m);
    let mut second = DMatrix::<f64>::zeros(m, m);
    let mut m3 = DVector::<f64>::zeros(m);
    for c in &mix.components {
        for (r, &i) in subset.iter().enumerate() {
            let v = c.cov[(i, i)];
            m1[r] += c.weight * c.mean[i];
            m3[r] += c.weight * sn_raw_moment(c.mean[i], v, c.skewness[i], 3);
            for (s, &j) in subset.iter().enumerate() {
                second[(r, s)] += c.weight * (c.cov[(i, j)] + c.mean[i] * c.mean[j]);
            }
        }
    }
    let cov: DMatrix<f64> = &second - &m1 * m1.transpose();
    let cov = (&cov + cov.transpose()) * 0.5;
    let skew = DVector::from_fn(m, |r, _| {
        let (a, b, c) = (m1[r], second[(r, r)], m3[r]);
        let var = cov[(r, r)];
        (c - 3.0 * a * b + 2.0 * a * a * a) / var.powf(1.5)
    });
    JointSgcSummary::new(subset.iter().map(|&i| mix.names[i].clone()).collect(), m1, cov, skew)
}

/// `M × N` combination matrix with one name per row.
#[derive(Debug, Clone, PartialEq)]
pub struct LinCombMatrix {
    pub names: Vec<String>,
    pub a: DMatrix<f64>,
}

impl LinCombMatrix {
    pub fn new(names: Vec<String>, a: DMatrix<f64>) -> Result<Self> {
        if names.len() != a.nrows() {
            return Err(Error::DimensionMismatch { expected: a.nrows(), got: names.len() });
        }
        if let Some(h) = (0..a.nrows()).find(|&h| a.row(h).iter().all(|&v| v == 0.0)) {
            return Err(Error::InvalidSpec(format!("row '{}' of the combination matrix is all zero", names[h])));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("combination matrix has non-finite entries".into()));
        }
        Ok(Self { names, a })
    }

    pub fn identity(names: Vec<String>) -> Self {
        let n = names.len();
        Self { names, a: DMatrix::identity(n, n) }
    }

    /// Reads combinations from CSV. With a header starting `name`, the other
    /// header fields are latent component names and unlisted components get
    /// coefficient zero. Without one, every row holds all N coefficients
    /// and rows are named `lc1`, `lc2`, ….
    pub fn from_csv_reader(reader: impl std::io::Read, latent_names: &[String]) -> Result<Self> {
        let mut text = String::new();
        let mut reader = reader;
        reader.read_to_string(&mut text)?;
        let named = text.trim_start().split([',', '\n', '\r']).next().map(str::trim) == Some("name");
        if !named {
            return Self::from_plain_csv(&text, latent_names);
        }
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let headers = rdr.headers()?.clone();
        let mut cols = Vec::with_capacity(headers.len() - 1);
        for h in headers.iter().skip(1) {
            let j = latent_names.iter().position(|n| n == h).ok_or_else(|| Error::UnknownComponent(h.to_string()))?;
            cols.push(j);
        }
        let mut names = Vec::new();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            names.push(rec.get(0).unwrap_or_default().to_string());
            let mut row = vec![0.0; latent_names.len()];
            for (k, &j) in cols.iter().enumerate() {
                let field = rec.get(k + 1).unwrap_or("");
                row[j] = if field.is_empty() {
                    0.0
                } else {
                    field.parse().map_err(|_| Error::Format(format!("bad coefficient '{field}'")))?
                };
            }
            rows.push(row);
        }
        let a = DMatrix::from_fn(rows.len(), latent_names.len(), |r, c| rows[r][c]);
        Self::new(names, a)
    }

    fn from_plain_csv(text: &str, latent_names: &[String]) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() != latent_names.len() {
                return Err(Error::DimensionMismatch { expected: latent_names.len(), got: rec.len() });
            }
            let row = rec
                .iter()
                .map(|f| f.parse::<f64>().map_err(|_| Error::Format(format!("bad coefficient '{f}'"))))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        let a = DMatrix::from_fn(rows.len(), latent_names.len(), |r, c| rows[r][c]);
        Self::new((1..=rows.len()).map(|k| format!("lc{k}")).collect(), a)
    }

    /// Restriction to the columns in `cols`, in that order.
    pub fn columns(&self, cols: &[usize]) -> Self {
        let a = DMatrix::from_fn(self.a.nrows(), cols.len(), |r, c| self.a[(r, cols[c])]);
        Self { names: self.names.clone(), a }
    }

    pub fn from_csv(path: &Path, latent_names: &[String]) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?, latent_names)
    }

    /// Columns with a nonzero coefficient in some row.
    pub fn support(&self) -> Vec<usize> {
        (0..self.a.ncols()).filter(|&j| self.a.column(j).iter().any(|&v| v != 0.0)).collect()
    }
}

/// Summary of `A x` from a summary of `x`.
pub fn transform_jmarginal(summary: &JointSgcSummary, a: &LinCombMatrix) -> Result<JointSgcSummary> {
    let n = summary.dim();
    if a.a.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: a.a.ncols() });
    }
    let mu = summary.mean_vector();
    let sigma = summary.cov_matrix();
    let mean = &a.a * mu;
    let cov = &a.a * &sigma * a.a.transpose();
    let cov = (&cov + cov.transpose()) * 0.5;
    // Third central moments of each input component.
    let k3 = DVector::from_fn(n, |i, _| summary.skewness[i] * sigma[(i, i)].powf(1.5));
    let skew = DVector::from_fn(a.a.nrows(), |h, _| {
        let num: f64 = (0..n).map(|i| a.a[(h, i)].powi(3) * k3[i]).sum();
        num / cov[(h, h)].powf(1.5)
    });
    JointSgcSummary::new(a.names.clone(), mean, cov, skew)
}

/// Summary and skew-normal marginals of `A x` straight from a fit: moments
/// of the support of `A` only, then the transform.
pub fn lincomb_from_fit(fit: &InlaFit, a: &LinCombMatrix) -> Result<(JointSgcSummary, Vec<Marginal1d>)> {
    if a.a.ncols() != fit.latent_dim() {
        return Err(Error::DimensionMismatch { expected: fit.latent_dim(), got: a.a.ncols() });
    }
    let support = a.support();
    let sub = subset_moments(&Mixture::from_fit(fit)?, &support)?;
    let out = transform_jmarginal(&sub, &a.columns(&support))?;
    let marginals = marginals_1d(&out)?;
    Ok((out, marginals))
}

/// Density tabulated on an increasing abscissa grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityTable {
    pub x: Vec<f64>,
    pub density: Vec<f64>,
}

impl DensityTable {
    pub fn from_fn(x: Vec<f64>, f: impl Fn(f64) -> f64) -> Self {
        let density = x.iter().map(|&v| f(v)).collect();
        Self { x, density }
    }

    /// `n` equispaced points on `[lo, hi]`.
    pub fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
    }

    pub fn integral(&self) -> f64 {
        trapezoid(&self.x, &self.density)
    }
}

pub(crate) fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1])).sum()
}

/// A fitted one-dimensional marginal.
#[derive(Debug, Clone)]
pub struct Marginal1d {
    pub name: String,
    pub params: SkewNormal,
    pub table: DensityTable,
}

impl Marginal1d {
    /// Summary row from the fitted skew normal.
    pub fn summary(&self) -> Result<SummaryRow> {
        let p = &self.params;
        Ok(SummaryRow {
            name: self.name.clone(),
            mean: p.mean(),
            sd: p.variance().sqrt(),
            q025: p.quantile(0.025)?,
            q50: p.quantile(0.5)?,
            q975: p.quantile(0.975)?,
            mode: p.mode(),
            skewness: p.skewness(),
        })
    }
}

/// Points per tabulated marginal density.
pub const MARGINAL_POINTS: usize = 401;

/// Skew-normal fit of every component, tabulated on `mean ± 6 sd`.
pub fn marginals_1d(summary: &JointSgcSummary) -> Result<Vec<Marginal1d>> {
    (0..summary.dim())
        .map(|h| {
            let g = summary.skewness[h];
            if !(g.abs() < MAX_SKEWNESS) {
                return Err(Error::SkewnessOutOfRange(g));
            }
            let var = summary.cov[h][h];
            let params = delta_parameterization(MomentTriple::new(summary.mean[h], var, g))?;
            let sd = var.sqrt();
            let x = DensityTable::grid(summary.mean[h] - 6.0 * sd, summary.mean[h] + 6.0 * sd, MARGINAL_POINTS);
            Ok(Marginal1d { name: summary.names[h].clone(), params, table: DensityTable::from_fn(x, |v| params.pdf(v)) })
        })
        .collect()
}

/// `∫ p log(p/q)` by the trapezoid rule on the common grid, floored at 0.
pub fn kld_1d(p: &DensityTable, q: &DensityTable) -> Result<f64> {
    if p.x.len() != q.x.len() || p.x.len() < 2 {
        return Err(Error::SupportMismatch(format!("grids of length {} and {}", p.x.len(), q.x.len())));
    }
    let scale = (p.x[p.x.len() - 1] - p.x[0]).abs().max(f64::MIN_POSITIVE);
    if p.x.iter().zip(&q.x).any(|(a, b)| (a - b).abs() > 1e-12 * scale) {
        return Err(Error::SupportMismatch("abscissae differ".into()));
    }
    let integrand: Vec<f64> = p
        .density
        .iter()
        .zip(&q.density)
        .map(|(&pi, &qi)| if pi > 0.0 { pi * (pi / qi.max(f64::MIN_POSITIVE)).ln() } else { 0.0 })
        .collect();
    Ok(trapezoid(&p.x, &integrand).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::norm_pdf;
    use nalgebra::dmatrix;

    pub(crate) fn worked_example() -> JointSgcSummary {
        JointSgcSummary::new(
            vec!["x1".into(), "x2".into()],
            DVector::from_vec(vec![1.0, 2.0]),
            dmatrix![2.0, 1.0; 1.0, 5.0],
            DVector::from_vec(vec![-0.4, 0.6]),
        )
        .unwrap()
    }

    fn worked_matrix() -> LinCombMatrix {
        LinCombMatrix::new(vec!["sum".into(), "diff".into()], dmatrix![1.0, 1.0; 1.0, -1.0]).unwrap()
    }

    #[test]
    fn worked_example_numbers() {
        let out = transform_jmarginal(&worked_example(), &worked_matrix()).unwrap();
        assert_eq!(out.mean, vec![3.0, -1.0]);
        assert_eq!(out.cov, vec![vec![9.0, -3.0], vec![-3.0, 5.0]]);
        assert!((out.skewness[0] - 0.206).abs() < 1e-3);
        assert!((out.skewness[1] + 0.701).abs() < 1e-3);
        let m = marginals_1d(&out).unwrap();
        assert!((m[0].params.alpha - 1.217).abs() < 5e-3);
        assert!((m[1].params.alpha + 3.233).abs() < 1e-2);
    }

    #[test]
    fn identity_combination_is_a_no_op() {
        let s = worked_example();
        let out = transform_jmarginal(&s, &LinCombMatrix::identity(s.names.clone())).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn covariance_equals_explicit_double_sum() {
        let mut r = crate::rng::stream(1, 0);
        use rand::Rng as _;
        let b = DMatrix::from_fn(3, 3, |_, _| r.random_range(-1.0..1.0));
        let sigma = &b * b.transpose() + DMatrix::identity(3, 3) * 0.5;
        let s = JointSgcSummary::new(
            vec!["a".into(), "b".into(), "c".into()],
            DVector::from_vec(vec![0.1, 0.2, 0.3]),
            sigma.clone(),
            DVector::from_vec(vec![0.1, -0.2, 0.3]),
        )
        .unwrap();
        let a = DMatrix::from_fn(3, 3, |_, _| r.random_range(-2.0..2.0));
        let out = transform_jmarginal(&s, &LinCombMatrix::new(vec!["p".into(), "q".into(), "r".into()], a.clone()).unwrap()).unwrap();
        for h in 0..3 {
            for l in 0..3 {
                let mut v = 0.0;
                for i in 0..3 {
                    for j in 0..3 {
                        v += a[(h, i)] * a[(l, j)] * sigma[(i, j)];
                    }
                }
                assert!((out.cov[h][l] - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn row_scaling_keeps_skewness() {
        let s = worked_example();
        let base = transform_jmarginal(&s, &worked_matrix()).unwrap();
        let scaled = LinCombMatrix::new(vec!["a".into(), "b".into()], dmatrix![2.5, 2.5; 1.0, -1.0]).unwrap();
        let out = transform_jmarginal(&s, &scaled).unwrap();
        assert!((out.skewness[0] - base.skewness[0]).abs() < 1e-12);
    }

    #[test]
    fn composition_is_consistent_for_mean_and_covariance() {
        let s = worked_example();
        let a = worked_matrix();
        let b = LinCombMatrix::new(vec!["u".into(), "v".into()], dmatrix![0.5, 2.0; -1.0, 1.5]).unwrap();
        let two = transform_jmarginal(&transform_jmarginal(&s, &a).unwrap(), &b).unwrap();
        let ba = LinCombMatrix::new(vec!["u".into(), "v".into()], &b.a * &a.a).unwrap();
        let one = transform_jmarginal(&s, &ba).unwrap();
        for h in 0..2 {
            assert!((two.mean[h] - one.mean[h]).abs() < 1e-12);
            for l in 0..2 {
                assert!((two.cov[h][l] - one.cov[h][l]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn subset_of_single_configuration_is_unchanged() {
        let cov = dmatrix![2.0, 0.3, 0.1; 0.3, 1.0, 0.2; 0.1, 0.2, 0.5];
        let mix = Mixture::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![MixtureComponent {
                weight: 1.0,
                mean: DVector::from_vec(vec![1.0, 2.0, 3.0]),
                cov: cov.clone(),
                skewness: DVector::from_vec(vec![0.1, -0.2, 0.3]),
            }],
        )
        .unwrap();
        let s = subset_moments(&mix, &[2, 0]).unwrap();
        assert_eq!(s.names, vec!["c".to_string(), "a".to_string()]);
        assert_eq!(s.mean, vec![3.0, 1.0]);
        assert_eq!(s.cov, vec![vec![0.5, 0.1], vec![0.1, 2.0]]);
        assert_eq!(s.skewness, vec![0.3, 0.1]);
        assert!(subset_moments(&mix, &[3]).is_err());
    }

    #[test]
    fn two_gaussian_mixture() {
        let comp = |m: f64| MixtureComponent {
            weight: 0.5,
            mean: DVector::from_element(1, m),
            cov: DMatrix::from_element(1, 1, 1.0),
            skewness: DVector::zeros(1),
        };
        let mix = Mixture::new(vec!["x".into()], vec![comp(-1.0), comp(1.0)]).unwrap();
        let s = subset_moments(&mix, &[0]).unwrap();
        assert!(s.mean[0].abs() < 1e-15);
        assert!((s.cov[0][0] - 2.0).abs() < 1e-15);
        assert!(s.skewness[0].abs() < 1e-15);
    }

    #[test]
    fn gaussian_component_fit() {
        let s = JointSgcSummary::new(vec!["g".into()], DVector::from_element(1, 0.7), DMatrix::from_element(1, 1, 4.0), DVector::zeros(1))
            .unwrap();
        let m = &marginals_1d(&s).unwrap()[0];
        assert_eq!(m.params.alpha, 0.0);
        assert_eq!(m.params.xi, 0.7);
        assert_eq!(m.params.omega, 2.0);
        assert!((m.table.integral() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn kld_closed_form() {
        let x = DensityTable::grid(-12.0, 12.0, 4801);
        let p = DensityTable::from_fn(x.clone(), norm_pdf);
        assert!(kld_1d(&p, &p).unwrap() <= 1e-10);
        for d in [0.04, 0.1, 0.3, 0.5] {
            let q = DensityTable::from_fn(x.clone(), |v| norm_pdf(v - d));
            let k = kld_1d(&p, &q).unwrap();
            assert!((k / (0.5 * d * d) - 1.0).abs() < 0.02, "{d}: {k}");
        }
        let q = DensityTable::from_fn(DensityTable::grid(-10.0, 10.0, 4801), norm_pdf);
        assert!(matches!(kld_1d(&p, &q), Err(Error::SupportMismatch(_))));
    }

    #[test]
    fn combination_csv() {
        let names: Vec<String> = ["eta[1]", "eta[2]", "(Intercept)"].iter().map(|s| s.to_string()).collect();
        let text = "name,eta[1],eta[2]\ns12,1,1\nd12,1,-1\n";
        let a = LinCombMatrix::from_csv_reader(text.as_bytes(), &names).unwrap();
        assert_eq!(a.names, vec!["s12".to_string(), "d12".to_string()]);
        assert_eq!(a.a, dmatrix![1.0, 1.0, 0.0; 1.0, -1.0, 0.0]);
        assert_eq!(a.support(), vec![0, 1]);
        assert!(matches!(
            LinCombMatrix::from_csv_reader("name,zz\nr,1\n".as_bytes(), &names),
            Err(Error::UnknownComponent(_))
        ));
        assert!(LinCombMatrix::from_csv_reader("name,eta[1]\nr,0\n".as_bytes(), &names).is_err());
        let plain = LinCombMatrix::from_csv_reader("1,1,0\n0,1,1\n".as_bytes(), &names).unwrap();
        assert_eq!(plain.names, vec!["lc1".to_string(), "lc2".to_string()]);
        assert_eq!(plain.a, dmatrix![1.0, 1.0, 0.0; 0.0, 1.0, 1.0]);
        assert_eq!(plain.columns(&[2, 0]).a, dmatrix![0.0, 1.0; 1.0, 0.0]);
        assert!(matches!(
            LinCombMatrix::from_csv_reader("1,1\n".as_bytes(), &names),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn summary_json_round_trip() {
        let s = worked_example();
        let back = JointSgcSummary::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(back, s);
        let a = marginals_1d(&s).unwrap();
        let b = marginals_1d(&back).unwrap();
        assert_eq!(a[1].params, b[1].params);
    }
}
