//! Versioned binary fit file.
//!
//! Layout, little endian: magic `SGCFIT\0\0`, version `u32`, the model
//! specification as JSON (`u32` byte length then UTF-8), K, d and N as `u32`,
//! the hyperparameter mode (d `f64`), then per configuration: θ, log
//! posterior and weight as `f64`, converged `u8`, iterations `u32`, gradient
//! norm, mode and Newton curvature `c` (N `f64` each), and per latent the
//! refinement mean, sd, skewness as `f64`, clamped `u8`, dropped nodes `u32`.
//! Factorizations are rebuilt from (θ, mode, c) on load.

use std::io::{BufRead, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::inla::{Configuration, GaussianApprox, GridPoint, InlaFit, MarginalRefinement};
use crate::model::{GlmmModel, LatentModel, ModelSpec};
use crate::sampler::{read_str, write_str};

const FIT_MAGIC: &[u8; 8] = b"SGCFIT\0\0";
pub const FIT_VERSION: u32 = 1;

/// A fit together with the model it was computed for.
#[derive(Debug, Clone)]
pub struct FitArtifact {
    pub spec: ModelSpec,
    pub fit: InlaFit,
}

fn write_vec(w: &mut impl Write, v: &[f64]) -> Result<()> {
    for x in v {
        w.write_f64::<LittleEndian>(*x)?;
    }
    Ok(())
}

fn read_vec(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    (0..n).map(|_| Ok(r.read_f64::<LittleEndian>()?)).collect()
}

impl FitArtifact {
    pub fn new(spec: ModelSpec, fit: InlaFit) -> Result<Self> {
        if fit.latent_dim() != spec.dim() {
            return Err(Error::DimensionMismatch { expected: spec.dim(), got: fit.latent_dim() });
        }
        Ok(Self { spec, fit })
    }

    pub fn write(&self, w: impl Write) -> Result<()> {
        let mut w = std::io::BufWriter::new(w);
        w.write_all(FIT_MAGIC)?;
        w.write_u32::<LittleEndian>(FIT_VERSION)?;
        write_str(&mut w, &serde_json::to_string(&self.spec)?)?;
        let f = &self.fit;
        w.write_u32::<LittleEndian>(f.configurations.len() as u32)?;
        w.write_u32::<LittleEndian>(f.hyper_names.len() as u32)?;
        w.write_u32::<LittleEndian>(f.latent_dim() as u32)?;
        write_vec(&mut w, &f.hyper_mode)?;
        for c in &f.configurations {
            write_vec(&mut w, &c.point.theta)?;
            w.write_f64::<LittleEndian>(c.point.log_posterior)?;
            w.write_f64::<LittleEndian>(c.point.weight)?;
            w.write_u8(c.ga.converged as u8)?;
            w.write_u32::<LittleEndian>(c.ga.iterations as u32)?;
            w.write_f64::<LittleEndian>(c.ga.gradient_norm)?;
            write_vec(&mut w, c.ga.mode.as_slice())?;
            write_vec(&mut w, c.ga.c.as_slice())?;
            for m in &c.marginals {
                write_vec(&mut w, &[m.mean, m.sd, m.skewness])?;
                w.write_u8(m.clamped as u8)?;
                w.write_u32::<LittleEndian>(m.dropped_nodes as u32)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read(r: impl Read) -> Result<Self> {
        let mut r = std::io::BufReader::new(r);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != FIT_MAGIC {
            return Err(Error::Format("not a fit file".into()));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != FIT_VERSION {
            return Err(Error::Format(format!("unsupported fit file version {version}")));
        }
        let spec: ModelSpec = serde_json::from_str(&read_str(&mut r)?)?;
        let model = GlmmModel::new(spec.clone())?;
        let k = r.read_u32::<LittleEndian>()? as usize;
        let d = r.read_u32::<LittleEndian>()? as usize;
        let n = r.read_u32::<LittleEndian>()? as usize;
        if n != model.latent_dim() || d != model.hyper_dim() {
            return Err(Error::Format(format!("fit dimensions (d={d}, N={n}) do not match the stored model")));
        }
        let hyper_mode = read_vec(&mut r, d)?;
        let mut configurations = Vec::with_capacity(k);
        for _ in 0..k {
            let theta = read_vec(&mut r, d)?;
            let log_posterior = r.read_f64::<LittleEndian>()?;
            let weight = r.read_f64::<LittleEndian>()?;
            let converged = r.read_u8()? != 0;
            let iterations = r.read_u32::<LittleEndian>()? as usize;
            let gradient_norm = r.read_f64::<LittleEndian>()?;
            let mode = DVector::from_vec(read_vec(&mut r, n)?);
            let c = DVector::from_vec(read_vec(&mut r, n)?);
            let mut ga = GaussianApprox::from_parts(&model, &theta, mode, c, converged, iterations)?;
            ga.gradient_norm = gradient_norm;
            let marginals = (0..n)
                .map(|index| {
                    let v = read_vec(&mut r, 3)?;
                    let clamped = r.read_u8()? != 0;
                    let dropped_nodes = r.read_u32::<LittleEndian>()? as usize;
                    Ok(MarginalRefinement { index, mean: v[0], sd: v[1], skewness: v[2], clamped, dropped_nodes })
                })
                .collect::<Result<Vec<_>>>()?;
            configurations.push(Configuration { point: GridPoint { theta, log_posterior, weight }, ga, marginals });
        }
        if r.fill_buf()?.iter().next().is_some() {
            return Err(Error::Format("trailing bytes after fit data".into()));
        }
        let fit = InlaFit { latent_names: model.latent_names(), hyper_names: model.hyper_names(), hyper_mode, configurations };
        Ok(Self { spec, fit })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write(std::fs::File::create(path)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(std::fs::File::open(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inla::fit;
    use crate::model::{simulate_glmm, Family};

    fn artifact() -> FitArtifact {
        let sim = simulate_glmm(Family::Poisson, 12, 3, 1.0, 0.3, 4).unwrap();
        let f = fit(&GlmmModel::new(sim.spec.clone()).unwrap()).unwrap();
        FitArtifact::new(sim.spec, f).unwrap()
    }

    #[test]
    fn round_trip_is_byte_stable() {
        let a = artifact();
        let mut bytes = Vec::new();
        a.write(&mut bytes).unwrap();
        let b = FitArtifact::read(bytes.as_slice()).unwrap();
        assert_eq!(b.spec, a.spec);
        assert_eq!(b.fit.weights(), a.fit.weights());
        for (x, y) in a.fit.configurations.iter().zip(&b.fit.configurations) {
            assert_eq!(x.marginals, y.marginals);
            assert_eq!(x.ga.mode, y.ga.mode);
            for i in 0..x.ga.dim() {
                assert!((x.ga.marginal_sd(i) - y.ga.marginal_sd(i)).abs() < 1e-12);
            }
        }
        let mut again = Vec::new();
        b.write(&mut again).unwrap();
        assert_eq!(bytes, again);
    }

    #[test]
    fn rejects_damaged_files() {
        let mut bytes = Vec::new();
        artifact().write(&mut bytes).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(FitArtifact::read(bad.as_slice()), Err(Error::Format(_))));
        let mut bad = bytes.clone();
        bad[8] = 9;
        assert!(matches!(FitArtifact::read(bad.as_slice()), Err(Error::Format(_))));
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(FitArtifact::read(long.as_slice()), Err(Error::Format(_))));
        assert!(FitArtifact::read(&bytes[..bytes.len() - 3]).is_err());
    }
}
