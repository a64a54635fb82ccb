//! Tabulated standardized skew-normal functions.
//!
//! For each skewness on a 0.01 grid in `[-0.99, 0.99]` the table stores
//! cubic Hermite interpolants of the correction map `g_γ` at 61 fixed nodes,
//! and of the log pdf and the cdf on a dense equispaced grid. Lookups round γ to two digits and binary search
//! the grid.
//!
//! # File format
//!
//! Little-endian, version 2:
//!
//! | bytes            | content                                  |
//! |------------------|------------------------------------------|
//! | 8                | magic `SGCQTAB\0`                        |
//! | 4 (u32)          | version                                  |
//! | 4 (u32)          | number of skewness values `G`            |
//! | 4 (u32)          | number of map nodes `M`                  |
//! | 4 (u32)          | number of density nodes `D`              |
//! | 8·G (f64)        | skewness grid                            |
//! | 8·M (f64)        | map nodes                                |
//! | 8·D (f64)        | density nodes                            |
//! | 8·(2M+4D) per γ  | map values, map slopes, log-pdf values, log-pdf slopes, cdf values, cdf slopes |

use std::io::{Read, Write};
use std::path::Path;
use std::sync::OnceLock;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::interp::CubicHermite;
use super::SkewNormal;
use crate::error::{Error, Result};
use crate::special::norm_pdf;

/// Number of tabulated skewness values.
pub const GAMMA_GRID_LEN: usize = 199;
/// Largest tabulated |γ|.
pub const GAMMA_MAX: f64 = 0.99;
/// Decimal digits kept when rounding γ for lookup.
pub const GAMMA_DIGITS: i32 = 2;
/// Outermost node; beyond it interpolants continue linearly.
pub const Z_MAX: f64 = 6.0;
const CORE_HALF_WIDTH: f64 = 3.6;
const CORE_NODES: usize = 55;
const TAIL_NODES: [f64; 3] = [4.0, 5.0, 6.0];
/// Equispaced pdf/cdf nodes on `[-Z_MAX, Z_MAX]`, step 0.025.
const DENSITY_NODES: usize = 481;
const MAGIC: &[u8; 8] = b"SGCQTAB\0";
const VERSION: u32 = 2;

fn default_nodes() -> Vec<f64> {
    let mut z: Vec<f64> = TAIL_NODES.iter().rev().map(|t| -t).collect();
    let h = 2.0 * CORE_HALF_WIDTH / (CORE_NODES - 1) as f64;
    z.extend((0..CORE_NODES).map(|j| -CORE_HALF_WIDTH + j as f64 * h));
    z.extend(TAIL_NODES);
    z
}

fn density_nodes() -> Vec<f64> {
    let h = 2.0 * Z_MAX / (DENSITY_NODES - 1) as f64;
    (0..DENSITY_NODES).map(|j| -Z_MAX + j as f64 * h).collect()
}

fn rounded_gamma(gamma: f64) -> f64 {
    let s = 10f64.powi(GAMMA_DIGITS);
    (gamma * s).round() / s
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    map: CubicHermite,
    pdf: CubicHermite,
    cdf: CubicHermite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantileTable {
    gammas: Vec<f64>,
    nodes: Vec<f64>,
    dense: Vec<f64>,
    entries: Vec<Entry>,
    core_step: f64,
    dense_step: f64,
}

impl QuantileTable {
    /// Tabulates the direct solver on the default grid.
    pub fn build() -> Self {
        let nodes = default_nodes();
        let dense = density_nodes();
        let gammas: Vec<f64> = (0..GAMMA_GRID_LEN).map(|k| (k as f64 - 99.0) / 100.0).collect();
        let entries = gammas.iter().map(|&g| Self::tabulate(g, &nodes, &dense)).collect();
        Self::from_parts(gammas, nodes, dense, entries)
    }

    fn from_parts(gammas: Vec<f64>, nodes: Vec<f64>, dense: Vec<f64>, entries: Vec<Entry>) -> Self {
        let core_step = 2.0 * CORE_HALF_WIDTH / (CORE_NODES - 1) as f64;
        let dense_step = 2.0 * Z_MAX / (DENSITY_NODES - 1) as f64;
        Self { gammas, nodes, dense, entries, core_step, dense_step }
    }

    fn tabulate(gamma: f64, nodes: &[f64], dense: &[f64]) -> Entry {
        let sn = SkewNormal::standardized(gamma).expect("grid skewness is attainable");
        let (mut mv, mut md) = (Vec::new(), Vec::new());
        let (mut pv, mut pd) = (Vec::new(), Vec::new());
        let (mut cv, mut cd) = (Vec::new(), Vec::new());
        for &z in nodes {
            let x = if gamma == 0.0 { z } else { sn.quantile_of_normal_score(z) };
            mv.push(x);
            md.push(norm_pdf(z) / sn.pdf(x));
        }
        for &z in dense {
            pv.push(sn.ln_pdf(z));
            pd.push(sn.ln_pdf_derivative(z));
            cv.push(sn.cdf(z));
            cd.push(sn.pdf(z));
        }
        Entry {
            map: CubicHermite::monotone_with_slopes(nodes.to_vec(), mv, md),
            pdf: CubicHermite::with_slopes(dense.to_vec(), pv, pd),
            cdf: CubicHermite::monotone_with_slopes(dense.to_vec(), cv, cd),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Grid index of `round(γ, 2)`, found by binary search.
    pub fn lookup(&self, gamma: f64) -> Result<usize> {
        if !(gamma.abs() <= GAMMA_MAX + 0.005) || gamma.is_nan() {
            return Err(Error::SkewnessOutOfRange(gamma));
        }
        let g = rounded_gamma(gamma).clamp(-GAMMA_MAX, GAMMA_MAX);
        let k = self.gammas.partition_point(|&v| v < g - 1e-9);
        Ok(k.min(self.gammas.len() - 1))
    }

    pub fn gamma_at(&self, k: usize) -> f64 {
        self.gammas[k]
    }

    /// Interpolation segment containing `z`, or `None` outside the nodes.
    #[inline]
    fn segment(&self, z: f64) -> Option<usize> {
        let first_core = TAIL_NODES.len();
        if z.abs() < CORE_HALF_WIDTH {
            let j = ((z + CORE_HALF_WIDTH) / self.core_step) as usize;
            return Some(first_core + j.min(CORE_NODES - 2));
        }
        if z.abs() >= Z_MAX || z.is_nan() {
            return None;
        }
        let j = self.nodes.partition_point(|&v| v <= z);
        Some(j.saturating_sub(1).min(self.nodes.len() - 2))
    }

    /// Density-grid segment of `z`, for `|z| < Z_MAX`.
    #[inline]
    fn dense_segment(&self, z: f64) -> usize {
        (((z + Z_MAX) / self.dense_step) as usize).min(DENSITY_NODES - 2)
    }

    #[inline]
    fn eval(&self, f: &CubicHermite, z: f64) -> f64 {
        match self.segment(z) {
            Some(j) => f.eval_segment(j, z),
            None => f.eval(z),
        }
    }

    /// `g_γ(z)` from the interpolant at grid index `k`.
    #[inline]
    pub fn map_at(&self, k: usize, z: f64) -> f64 {
        self.eval(&self.entries[k].map, z)
    }

    pub fn map(&self, gamma: f64, z: f64) -> Result<f64> {
        Ok(self.map_at(self.lookup(gamma)?, z))
    }

    /// Standardized skew-normal pdf; exact outside the node range.
    pub fn pdf(&self, gamma: f64, x: f64) -> Result<f64> {
        let k = self.lookup(gamma)?;
        if x.abs() >= Z_MAX {
            return Ok(SkewNormal::standardized(self.gammas[k])?.pdf(x));
        }
        Ok(self.entries[k].pdf.eval_segment(self.dense_segment(x), x).exp())
    }

    /// Standardized skew-normal cdf; exact outside the node range.
    pub fn cdf(&self, gamma: f64, x: f64) -> Result<f64> {
        let k = self.lookup(gamma)?;
        if x.abs() >= Z_MAX {
            return Ok(SkewNormal::standardized(self.gammas[k])?.cdf(x));
        }
        Ok(self.entries[k].cdf.eval_segment(self.dense_segment(x), x).clamp(0.0, 1.0))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(VERSION)?;
        w.write_u32::<LittleEndian>(self.gammas.len() as u32)?;
        w.write_u32::<LittleEndian>(self.nodes.len() as u32)?;
        w.write_u32::<LittleEndian>(self.dense.len() as u32)?;
        for v in self.gammas.iter().chain(&self.nodes).chain(&self.dense) {
            w.write_f64::<LittleEndian>(*v)?;
        }
        for e in &self.entries {
            for f in [&e.map, &e.pdf, &e.cdf] {
                for v in f.values().iter().chain(f.slopes()) {
                    w.write_f64::<LittleEndian>(*v)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a quantile table file".into()));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported quantile table version {version}")));
        }
        let g = r.read_u32::<LittleEndian>()? as usize;
        let m = r.read_u32::<LittleEndian>()? as usize;
        let dn = r.read_u32::<LittleEndian>()? as usize;
        if g != GAMMA_GRID_LEN || m != default_nodes().len() || dn != DENSITY_NODES {
            return Err(Error::Format(format!("unexpected table shape {g} x {m} x {dn}")));
        }
        let mut read_vec = |n: usize| -> Result<Vec<f64>> {
            let mut v = vec![0.0; n];
            r.read_f64_into::<LittleEndian>(&mut v)?;
            Ok(v)
        };
        let gammas = read_vec(g)?;
        let nodes = read_vec(m)?;
        let dense = read_vec(dn)?;
        if nodes != default_nodes() || dense != density_nodes() {
            return Err(Error::Format("quantile table nodes differ from the built-in layout".into()));
        }
        let mut entries = Vec::with_capacity(g);
        for _ in 0..g {
            let mut f = Vec::with_capacity(3);
            for (len, x) in [(m, &nodes), (dn, &dense), (dn, &dense)] {
                let y = read_vec(len)?;
                let d = read_vec(len)?;
                f.push(CubicHermite::with_slopes(x.clone(), y, d));
            }
            let cdf = f.pop().unwrap();
            let pdf = f.pop().unwrap();
            let map = f.pop().unwrap();
            entries.push(Entry { map, pdf, cdf });
        }
        Ok(Self::from_parts(gammas, nodes, dense, entries))
    }

    /// Loads `path` if it holds a valid table, otherwise builds one and
    /// tries to write it there. A missing or stale file is not an error.
    pub fn load_or_build(path: &Path) -> Self {
        match Self::load(path) {
            Ok(t) => t,
            Err(e) => {
                log::debug!("rebuilding quantile table ({e})");
                let t = Self::build();
                if let Err(e) = t.save(path) {
                    log::warn!("could not write quantile table to {}: {e}", path.display());
                }
                t
            }
        }
    }
}

static TABLE: OnceLock<QuantileTable> = OnceLock::new();

/// Process-wide table, built on first use.
pub fn quantile_table() -> &'static QuantileTable {
    TABLE.get_or_init(QuantileTable::build)
}

/// Installs `table` as the process-wide table. Returns `false` if a table
/// was already in use.
pub fn install_quantile_table(table: QuantileTable) -> bool {
    TABLE.set(table).is_ok()
}

/// Elementwise `g_{round(γ_ℓ, 2)}(z_ℓ)` by table interpolation.
pub fn fast_map(table: &QuantileTable, z: &[f64], gamma: &[f64]) -> Result<Vec<f64>> {
    if z.len() != gamma.len() {
        return Err(Error::DimensionMismatch { expected: z.len(), got: gamma.len() });
    }
    z.iter().zip(gamma).map(|(&zi, &gi)| Ok(table.map_at(table.lookup(gi)?, zi))).collect()
}
