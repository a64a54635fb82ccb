//! Dense precision-matrix algebra: Cholesky factorization, solves,
//! covariance extraction and (constrained) Gaussian sampling.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng;

/// Largest tolerated relative asymmetry before a matrix is rejected.
pub const SYMMETRY_TOL: f64 = 1e-8;

/// Symmetric positive-definite precision matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionMatrix(DMatrix<f64>);

impl PrecisionMatrix {
    /// Validates symmetry and stores `(Q + Qᵀ)/2`.
    pub fn new(q: DMatrix<f64>) -> Result<Self> {
        if !q.is_square() {
            return Err(Error::DimensionMismatch { expected: q.nrows(), got: q.ncols() });
        }
        let scale = q.amax().max(f64::MIN_POSITIVE);
        let asym = (&q - q.transpose()).amax() / scale;
        if asym > SYMMETRY_TOL || !asym.is_finite() {
            return Err(Error::NotSymmetric(asym));
        }
        let sym = (&q + q.transpose()) * 0.5;
        Ok(Self(sym))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        Self(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    /// Returns `Q + diag(d)`.
    pub fn add_diagonal(&self, d: &[f64]) -> Self {
        let mut m = self.0.clone();
        for (i, v) in d.iter().enumerate() {
            m[(i, i)] += v;
        }
        Self(m)
    }

    pub fn factorize(&self) -> Result<Factor> {
        Factor::new(self)
    }
}

/// Cholesky factor `Q = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Factor {
    chol: Cholesky<f64, Dyn>,
    lower: DMatrix<f64>,
    log_det: f64,
}

impl Factor {
    pub fn new(q: &PrecisionMatrix) -> Result<Self> {
        let chol = Cholesky::new(q.0.clone()).ok_or(Error::NotPositiveDefinite)?;
        let lower = chol.l();
        let mut log_det = 0.0;
        for i in 0..lower.nrows() {
            let d = lower[(i, i)];
            if d <= 0.0 || !d.is_finite() {
                return Err(Error::NotPositiveDefinite);
            }
            log_det += d.ln();
        }
        Ok(Self { chol, lower, log_det: 2.0 * log_det })
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    /// `log |Q|`.
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn lower(&self) -> &DMatrix<f64> {
        &self.lower
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    /// `Q⁻¹`, symmetrized.
    pub fn covariance(&self) -> DMatrix<f64> {
        let inv = self.chol.inverse();
        (&inv + inv.transpose()) * 0.5
    }

    /// `xᵀ Q x` evaluated as `‖Lᵀx‖²`.
    pub fn quad_form(&self, x: &DVector<f64>) -> f64 {
        self.lower.tr_mul(x).norm_squared()
    }

    /// Maps standard-normal columns `z` to `L⁻ᵀ z` in place, i.e. to draws
    /// with precision `Q` and zero mean.
    pub fn color_in_place(&self, z: &mut DMatrix<f64>) {
        self.lower.tr_solve_lower_triangular_mut(z);
    }

    /// `count` draws from `N(mean, Q⁻¹)` on the given stream, one per row.
    pub fn sample_with(&self, mean: &DVector<f64>, count: usize, rng: &mut rng::Rng) -> DMatrix<f64> {
        let n = self.dim();
        let mut z = DMatrix::<f64>::zeros(n, count);
        for v in z.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        self.color_in_place(&mut z);
        let mut out = z.transpose();
        for mut row in out.row_iter_mut() {
            row += mean.transpose();
        }
        out
    }
}

/// Linear equality constraints `C x = e`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    c: DMatrix<f64>,
    e: DVector<f64>,
}

impl LinearConstraint {
    pub fn new(c: DMatrix<f64>, e: DVector<f64>) -> Result<Self> {
        if c.nrows() != e.len() {
            return Err(Error::DimensionMismatch { expected: c.nrows(), got: e.len() });
        }
        if c.nrows() == 0 || c.nrows() > c.ncols() {
            return Err(Error::RankDeficientConstraint);
        }
        Ok(Self { c, e })
    }

    pub fn rows(&self) -> usize {
        self.c.nrows()
    }

    pub fn dim(&self) -> usize {
        self.c.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn rhs(&self) -> &DVector<f64> {
        &self.e
    }

    pub fn residual(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.c * x - &self.e
    }
}

/// Precomputed correction `x ↦ x − Q⁻¹Cᵀ(CQ⁻¹Cᵀ)⁻¹(Cx − e)`.
#[derive(Debug, Clone)]
pub struct ConstraintCorrection {
    constraint: LinearConstraint,
    gain: DMatrix<f64>,
}

impl ConstraintCorrection {
    pub fn new(factor: &Factor, con: &LinearConstraint) -> Result<Self> {
        if con.dim() != factor.dim() {
            return Err(Error::DimensionMismatch { expected: factor.dim(), got: con.dim() });
        }
        let w = factor.solve_matrix(&con.c.transpose());
        let s = &con.c * &w;
        let s_chol = Cholesky::new(s).ok_or(Error::RankDeficientConstraint)?;
        let diag_min = (0..s_chol.l_dirty().nrows())
            .map(|i| s_chol.l_dirty()[(i, i)])
            .fold(f64::INFINITY, f64::min);
        let diag_max = (0..s_chol.l_dirty().nrows())
            .map(|i| s_chol.l_dirty()[(i, i)])
            .fold(0.0, f64::max);
        if diag_min <= diag_max * 1e-7 {
            return Err(Error::RankDeficientConstraint);
        }
        // gain = W S⁻¹, shape N×k
        let gain = s_chol.solve(&w.transpose()).transpose();
        Ok(Self { constraint: con.clone(), gain })
    }

    pub fn constraint(&self) -> &LinearConstraint {
        &self.constraint
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        x - &self.gain * self.constraint.residual(x)
    }

    /// Applies the correction to every row of a sample matrix.
    pub fn apply_rows(&self, samples: &mut DMatrix<f64>) {
        for i in 0..samples.nrows() {
            let x = samples.row(i).transpose();
            let fixed = self.apply(&x);
            samples.set_row(i, &fixed.transpose());
        }
    }

    /// Covariance of the constrained Gaussian, `Σ − W S⁻¹ Wᵀ`.
    pub fn constrained_covariance(&self, cov: &DMatrix<f64>) -> DMatrix<f64> {
        let w = cov * self.constraint.c.transpose();
        let m = cov - &self.gain * w.transpose();
        (&m + m.transpose()) * 0.5
    }
}

pub fn factorize(q: &PrecisionMatrix) -> Result<Factor> {
    Factor::new(q)
}

pub fn covariance_from_precision(q: &PrecisionMatrix) -> Result<DMatrix<f64>> {
    Ok(Factor::new(q)?.covariance())
}

/// `count` rows drawn from `N(mean, Q⁻¹)`. Rows are generated in blocks of
/// [`rng::BLOCK_ROWS`], block `b` using stream `b` of `seed`.
pub fn sample_gmrf(mean: &DVector<f64>, q: &PrecisionMatrix, count: usize, seed: u64) -> Result<DMatrix<f64>> {
    if mean.len() != q.dim() {
        return Err(Error::DimensionMismatch { expected: q.dim(), got: mean.len() });
    }
    let factor = Factor::new(q)?;
    Ok(sample_blocks(&factor, mean, count, |b| rng::stream(seed, b as u64)))
}

pub(crate) fn sample_blocks(
    factor: &Factor,
    mean: &DVector<f64>,
    count: usize,
    stream_for_block: impl Fn(usize) -> rng::Rng,
) -> DMatrix<f64> {
    let n = factor.dim();
    let mut out = DMatrix::<f64>::zeros(count, n);
    let mut start = 0;
    let mut block = 0;
    while start < count {
        let rows = rng::BLOCK_ROWS.min(count - start);
        let mut r = stream_for_block(block);
        let draws = factor.sample_with(mean, rows, &mut r);
        out.view_mut((start, 0), (rows, n)).copy_from(&draws);
        start += rows;
        block += 1;
    }
    out
}

/// Constrained GMRF draws: unconstrained draws followed by the kriging
/// correction, so every row satisfies `C x = e`.
pub fn sample_constrained_gmrf(
    mean: &DVector<f64>,
    q: &PrecisionMatrix,
    con: &LinearConstraint,
    count: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    let factor = Factor::new(q)?;
    let corr = ConstraintCorrection::new(&factor, con)?;
    let mut s = sample_blocks(&factor, mean, count, |b| rng::stream(seed, b as u64));
    corr.apply_rows(&mut s);
    Ok(s)
}

pub fn apply_constraints(x: &DVector<f64>, q: &PrecisionMatrix, con: &LinearConstraint) -> Result<DVector<f64>> {
    let factor = Factor::new(q)?;
    Ok(ConstraintCorrection::new(&factor, con)?.apply(x))
}
