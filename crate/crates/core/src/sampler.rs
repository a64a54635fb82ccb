//! Joint posterior sampling from the mixture of copulas over the
//! hyperparameter grid, plus empirical summaries and kernel densities.
//!
//! A draw picks configuration `k` with probability `w_k` (inverse cdf over
//! the weights in grid order, uniforms from stream 0) and then draws the
//! latent field from that configuration's corrected full conditional.

use std::io::{BufRead, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::DMatrix;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::inla::InlaFit;
use crate::lincomb::DensityTable;
use crate::rng;
use crate::sgc::{CorrectionKind, FullConditionalSgc, MapMode};

/// Copulas for every grid configuration of a fit, ready to sample.
#[derive(Debug, Clone)]
pub struct JointSampler {
    pub latent_names: Vec<String>,
    pub hyper_names: Vec<String>,
    pub thetas: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub sgcs: Vec<FullConditionalSgc>,
}

impl JointSampler {
    pub fn new(fit: &InlaFit) -> Result<Self> {
        let sgcs = fit
            .configurations
            .iter()
            .map(|c| FullConditionalSgc::new(&c.ga, &c.marginals))
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(
            fit.latent_names.clone(),
            fit.hyper_names.clone(),
            fit.configurations.iter().map(|c| c.point.theta.clone()).collect(),
            fit.weights(),
            sgcs,
        )
    }

    pub fn from_parts(
        latent_names: Vec<String>,
        hyper_names: Vec<String>,
        thetas: Vec<Vec<f64>>,
        weights: Vec<f64>,
        sgcs: Vec<FullConditionalSgc>,
    ) -> Result<Self> {
        let k = sgcs.len();
        if k == 0 || thetas.len() != k || weights.len() != k {
            return Err(Error::InvalidSpec(format!(
                "sampler needs matching configurations: {} copulas, {} thetas, {} weights",
                k,
                thetas.len(),
                weights.len()
            )));
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidSpec(format!("weights must be nonnegative and sum to 1 (sum {total})")));
        }
        if let Some(s) = sgcs.iter().find(|s| s.dim() != latent_names.len()) {
            return Err(Error::DimensionMismatch { expected: latent_names.len(), got: s.dim() });
        }
        if let Some(t) = thetas.iter().find(|t| t.len() != hyper_names.len()) {
            return Err(Error::DimensionMismatch { expected: hyper_names.len(), got: t.len() });
        }
        Ok(Self { latent_names, hyper_names, thetas, weights, sgcs })
    }

    pub fn with_mode(mut self, mode: MapMode) -> Result<Self> {
        self.sgcs = self.sgcs.into_iter().map(|s| s.with_mode(mode)).collect::<Result<_>>()?;
        Ok(self)
    }

    /// Configuration index of each draw.
    pub fn draw_configurations(&self, count: usize, seed: u64) -> Vec<usize> {
        let mut cum = Vec::with_capacity(self.weights.len());
        let mut acc = 0.0;
        for w in &self.weights {
            acc += w;
            cum.push(acc);
        }
        let last = cum.len() - 1;
        let mut r = rng::stream(seed, 0);
        (0..count)
            .map(|_| {
                let u: f64 = r.random::<f64>() * acc;
                cum.partition_point(|&c| c <= u).min(last)
            })
            .collect()
    }

    pub fn sample(&self, kind: CorrectionKind, count: usize, seed: u64) -> Result<JointSamples> {
        let labels = self.draw_configurations(count, seed);
        let mut counts = vec![0usize; self.sgcs.len()];
        for &k in &labels {
            counts[k] += 1;
        }
        let batches: Vec<DMatrix<f64>> = self
            .sgcs
            .iter()
            .enumerate()
            .map(|(k, s)| s.sample_config(kind, counts[k], seed, k))
            .collect::<Result<_>>()?;
        let n = self.latent_names.len();
        let d = self.hyper_names.len();
        let mut x = DMatrix::zeros(count, n);
        let mut theta = DMatrix::zeros(count, d);
        let mut next = vec![0usize; self.sgcs.len()];
        for (r, &k) in labels.iter().enumerate() {
            x.set_row(r, &batches[k].row(next[k]));
            next[k] += 1;
            for (j, &v) in self.thetas[k].iter().enumerate() {
                theta[(r, j)] = v;
            }
        }
        Ok(JointSamples {
            latent_names: self.latent_names.clone(),
            hyper_names: self.hyper_names.clone(),
            theta,
            x,
            configurations: labels,
            kind,
            seed,
        })
    }
}

/// Draws from the joint sampler, one row per draw.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSamples {
    pub latent_names: Vec<String>,
    pub hyper_names: Vec<String>,
    pub theta: DMatrix<f64>,
    pub x: DMatrix<f64>,
    pub configurations: Vec<usize>,
    pub kind: CorrectionKind,
    pub seed: u64,
}

pub fn sample_joint(fit: &InlaFit, kind: CorrectionKind, count: usize, seed: u64) -> Result<JointSamples> {
    JointSampler::new(fit)?.sample(kind, count, seed)
}

const SAMPLES_MAGIC: &[u8; 8] = b"SGCSAMP\0";
const SAMPLES_VERSION: u32 = 1;

pub(crate) fn write_str(w: &mut impl Write, s: &str) -> Result<()> {
    w.write_u32::<LittleEndian>(s.len() as u32)?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

pub(crate) fn read_str(r: &mut impl Read) -> Result<String> {
    let len = r.read_u32::<LittleEndian>()? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| Error::Format("name is not UTF-8".into()))
}

impl JointSamples {
    pub fn count(&self) -> usize {
        self.x.nrows()
    }

    /// CSV with columns `config`, the hyperparameters and the latent field.
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["config".to_string()];
        header.extend(self.hyper_names.iter().cloned());
        header.extend(self.latent_names.iter().cloned());
        wr.write_record(&header)?;
        let mut rec = Vec::with_capacity(header.len());
        for r in 0..self.count() {
            rec.clear();
            rec.push(self.configurations[r].to_string());
            rec.extend(self.theta.row(r).iter().map(|v| v.to_string()));
            rec.extend(self.x.row(r).iter().map(|v| v.to_string()));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Binary layout, little endian: magic `SGCSAMP\0`, version `u32`,
    /// count, d, N as `u32`, kind `u8` (0 none, 1 mean, 2 skew), seed `u64`,
    /// d + N names (`u32` byte length then UTF-8), then per row the
    /// configuration `u32`, θ and x as `f64`.
    pub fn write_binary(&self, w: impl Write) -> Result<()> {
        let mut w = std::io::BufWriter::new(w);
        w.write_all(SAMPLES_MAGIC)?;
        w.write_u32::<LittleEndian>(SAMPLES_VERSION)?;
        w.write_u32::<LittleEndian>(self.count() as u32)?;
        w.write_u32::<LittleEndian>(self.hyper_names.len() as u32)?;
        w.write_u32::<LittleEndian>(self.latent_names.len() as u32)?;
        w.write_u8(match self.kind {
            CorrectionKind::None => 0,
            CorrectionKind::Mean => 1,
            CorrectionKind::Skew => 2,
        })?;
        w.write_u64::<LittleEndian>(self.seed)?;
        for n in self.hyper_names.iter().chain(&self.latent_names) {
            write_str(&mut w, n)?;
        }
        for r in 0..self.count() {
            w.write_u32::<LittleEndian>(self.configurations[r] as u32)?;
            for v in self.theta.row(r).iter().chain(self.x.row(r).iter()) {
                w.write_f64::<LittleEndian>(*v)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary(r: impl Read) -> Result<Self> {
        let mut r = std::io::BufReader::new(r);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != SAMPLES_MAGIC {
            return Err(Error::Format("not a sample file".into()));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != SAMPLES_VERSION {
            return Err(Error::Format(format!("unsupported sample file version {version}")));
        }
        let count = r.read_u32::<LittleEndian>()? as usize;
        let d = r.read_u32::<LittleEndian>()? as usize;
        let n = r.read_u32::<LittleEndian>()? as usize;
        let kind = match r.read_u8()? {
            0 => CorrectionKind::None,
            1 => CorrectionKind::Mean,
            2 => CorrectionKind::Skew,
            k => return Err(Error::Format(format!("unknown correction kind tag {k}"))),
        };
        let seed = r.read_u64::<LittleEndian>()?;
        let hyper_names = (0..d).map(|_| read_str(&mut r)).collect::<Result<Vec<_>>>()?;
        let latent_names = (0..n).map(|_| read_str(&mut r)).collect::<Result<Vec<_>>>()?;
        let mut theta = DMatrix::zeros(count, d);
        let mut x = DMatrix::zeros(count, n);
        let mut configurations = Vec::with_capacity(count);
        for row in 0..count {
            configurations.push(r.read_u32::<LittleEndian>()? as usize);
            for j in 0..d {
                theta[(row, j)] = r.read_f64::<LittleEndian>()?;
            }
            for j in 0..n {
                x[(row, j)] = r.read_f64::<LittleEndian>()?;
            }
        }
        if r.fill_buf()?.iter().next().is_some() {
            return Err(Error::Format("trailing bytes after sample data".into()));
        }
        Ok(Self { latent_names, hyper_names, theta, x, configurations, kind, seed })
    }
}

/// One row of a summary table.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q50: f64,
    pub q975: f64,
    /// Density maximizer; a kernel estimate for sampled columns.
    pub mode: f64,
    pub skewness: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable {
    pub rows: Vec<SummaryRow>,
}

pub const SUMMARY_HEADER: [&str; 7] = ["Index", "Mean", "Sd", "0.025quant", "0.5quant", "0.975quant", "Mode"];

impl SummaryTable {
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(SUMMARY_HEADER)?;
        for r in &self.rows {
            wr.write_record([
                r.name.clone(),
                r.mean.to_string(),
                r.sd.to_string(),
                r.q025.to_string(),
                r.q50.to_string(),
                r.q975.to_string(),
                r.mode.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Type-7 quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub const MIN_SUMMARY_SAMPLES: usize = 100;
pub const MIN_DENSITY_SAMPLES: usize = 1000;

/// Mean, sd (n − 1 denominator), type-7 quantiles, KDE mode and skewness.
pub fn summarize_column(name: &str, data: &[f64]) -> Result<SummaryRow> {
    if data.len() < MIN_SUMMARY_SAMPLES {
        return Err(Error::InsufficientSamples { needed: MIN_SUMMARY_SAMPLES, got: data.len() });
    }
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let (mut m2, mut m3) = (0.0, 0.0);
    for v in data {
        let d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    let sd = (m2 / (n - 1.0)).sqrt();
    let skewness = if m2 > 0.0 { (m3 / n) / (m2 / n).powf(1.5) } else { 0.0 };
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mode = if sorted[0] == sorted[sorted.len() - 1] { sorted[0] } else { Kde::new(&sorted, silverman_bandwidth(&sorted))?.mode() };
    Ok(SummaryRow {
        name: name.to_string(),
        mean,
        sd,
        q025: quantile_sorted(&sorted, 0.025),
        q50: quantile_sorted(&sorted, 0.5),
        q975: quantile_sorted(&sorted, 0.975),
        mode,
        skewness,
    })
}

/// Summary of every latent component.
pub fn summarize(samples: &JointSamples) -> Result<SummaryTable> {
    summarize_matrix(&samples.latent_names, &samples.x)
}

pub fn summarize_matrix(names: &[String], x: &DMatrix<f64>) -> Result<SummaryTable> {
    if names.len() != x.ncols() {
        return Err(Error::DimensionMismatch { expected: x.ncols(), got: names.len() });
    }
    let rows = (0..x.ncols()).map(|i| summarize_column(&names[i], x.column(i).as_slice())).collect::<Result<_>>()?;
    Ok(SummaryTable { rows })
}

/// `0.9 min(sd, IQR/1.34) n^{-1/5}` of sorted data.
pub fn silverman_bandwidth(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let sd = (sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * n.powf(-0.2)
}

/// Gaussian kernel density estimate evaluated by linear binning on a fine
/// grid and interpolation between grid points.
#[derive(Debug, Clone)]
pub struct Kde {
    lo: f64,
    step: f64,
    values: Vec<f64>,
    bandwidth: f64,
}

const KDE_MIN_BINS: usize = 2048;
const KDE_MAX_BINS: usize = 1 << 16;
const KDE_CUTOFF: f64 = 6.0;

impl Kde {
    pub fn new(data: &[f64], bandwidth: f64) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::InsufficientSamples { needed: 1, got: 0 });
        }
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::Domain(format!("bandwidth must be positive, got {bandwidth}")));
        }
        let (min, max) = data.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        if !min.is_finite() || !max.is_finite() {
            return Err(Error::Domain("non-finite sample value".into()));
        }
        let lo = min - KDE_CUTOFF * bandwidth;
        let hi = max + KDE_CUTOFF * bandwidth;
        // At least 8 grid points per bandwidth.
        let bins = (((hi - lo) / (bandwidth / 8.0)).ceil() as usize + 1).clamp(KDE_MIN_BINS, KDE_MAX_BINS);
        let step = (hi - lo) / (bins - 1) as f64;
        let mut counts = vec![0.0; bins];
        for &v in data {
            let t = (v - lo) / step;
            let j = (t.floor() as usize).min(bins - 2);
            let f = t - j as f64;
            counts[j] += 1.0 - f;
            counts[j + 1] += f;
        }
        let reach = ((KDE_CUTOFF * bandwidth / step).ceil() as usize).min(bins - 1);
        let norm = 1.0 / (data.len() as f64 * bandwidth * (2.0 * std::f64::consts::PI).sqrt());
        let kernel: Vec<f64> = (0..=reach).map(|k| (-0.5 * (k as f64 * step / bandwidth).powi(2)).exp() * norm).collect();
        let mut values = vec![0.0; bins];
        for (j, &c) in counts.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let a = j.saturating_sub(reach);
            let b = (j + reach).min(bins - 1);
            for (l, v) in values.iter_mut().enumerate().take(b + 1).skip(a) {
                *v += c * kernel[l.abs_diff(j)];
            }
        }
        Ok(Self { lo, step, values, bandwidth })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn eval(&self, x: f64) -> f64 {
        let t = (x - self.lo) / self.step;
        if !(t >= 0.0) || t > (self.values.len() - 1) as f64 {
            return 0.0;
        }
        let j = (t.floor() as usize).min(self.values.len() - 2);
        let f = t - j as f64;
        self.values[j] * (1.0 - f) + self.values[j + 1] * f
    }

    /// Grid argmax refined by a parabola through its neighbours.
    pub fn mode(&self) -> f64 {
        let (j, _) = self.values.iter().enumerate().fold((0, f64::NEG_INFINITY), |b, (j, &v)| if v > b.1 { (j, v) } else { b });
        let x = self.lo + j as f64 * self.step;
        if j == 0 || j + 1 == self.values.len() {
            return x;
        }
        let (a, b, c) = (self.values[j - 1], self.values[j], self.values[j + 1]);
        let denom = a - 2.0 * b + c;
        if denom >= 0.0 {
            return x;
        }
        x + 0.5 * self.step * (a - c) / denom
    }
}

/// Kernel density of column `i` on the abscissae `grid`, Silverman bandwidth.
pub fn marginal_density_estimate(samples: &JointSamples, i: usize, grid: &[f64]) -> Result<DensityTable> {
    if i >= samples.x.ncols() {
        return Err(Error::IndexOutOfRange { index: i, dim: samples.x.ncols() });
    }
    density_estimate(samples.x.column(i).as_slice(), grid, None)
}

/// Kernel density of `data` on `grid`; `bandwidth` defaults to Silverman's.
pub fn density_estimate(data: &[f64], grid: &[f64], bandwidth: Option<f64>) -> Result<DensityTable> {
    if data.len() < MIN_DENSITY_SAMPLES {
        return Err(Error::InsufficientSamples { needed: MIN_DENSITY_SAMPLES, got: data.len() });
    }
    let h = match bandwidth {
        Some(h) => h,
        None => {
            let mut sorted = data.to_vec();
            sorted.sort_by(f64::total_cmp);
            silverman_bandwidth(&sorted)
        }
    };
    let kde = Kde::new(data, h)?;
    Ok(DensityTable { x: grid.to_vec(), density: grid.iter().map(|&x| kde.eval(x)).collect() })
}

/// Reads a previously written sample CSV.
pub fn read_samples_csv(path: &Path) -> Result<(Vec<String>, DMatrix<f64>)> {
    let mut rdr = csv::Reader::from_path(path)?;
    let names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut rows: Vec<f64> = Vec::new();
    let mut count = 0;
    for rec in rdr.records() {
        let rec = rec?;
        for f in rec.iter() {
            rows.push(f.parse().map_err(|_| Error::Format(format!("bad number '{f}'")))?);
        }
        count += 1;
    }
    Ok((names.clone(), DMatrix::from_row_slice(count, names.len(), &rows)))
}
