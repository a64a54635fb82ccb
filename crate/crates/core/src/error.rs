use thiserror::Error;

/// Errors produced anywhere in the inference pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("matrix is not symmetric (relative asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("constraint system C Q^-1 C^T is singular")]
    RankDeficientConstraint,

    #[error("invalid model specification: {0}")]
    InvalidSpec(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("Newton iteration did not converge after {iterations} iterations (gradient norm {gradient:e})")]
    NoConvergence { iterations: usize, gradient: f64 },

    #[error("hyperparameter mode search failed: {0}")]
    ModeSearchFailure(String),

    #[error("skewness {0} outside the attainable skew-normal range")]
    SkewnessOutOfRange(f64),

    #[error("cdf evaluation hit the boundary of (0, 1) at standardized value {0}")]
    BoundaryEvaluation(f64),

    #[error("too few samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unknown latent component '{0}'")]
    UnknownComponent(String),

    #[error("density supports differ: {0}")]
    SupportMismatch(String),

    #[error("refinement dropped {dropped} of {total} grid nodes for latent {index}")]
    RefinementFailure { index: usize, dropped: usize, total: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
