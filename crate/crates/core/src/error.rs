//! Error type shared by every module.

use thiserror::Error;

/// Failure modes of the toolkit. Each variant maps onto one exit-code class of the CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unknown profile `{0}` (catalogue: exp, tanh, erf)")]
    Catalogue(String),
    #[error("shape mismatch: expected length {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("overflow: {0}")]
    Overflow(String),
    #[error("inconsistent input: {what} (residual {residual:.3e})")]
    Consistency { what: String, residual: f64 },
    #[error("near-singular system: smallest singular value {sigma_min:.3e} (operator norm {op_norm:.3e})")]
    NearSingular { sigma_min: f64, op_norm: f64 },
    #[error("degenerate corrector: |J| = {j_abs:.3e} below threshold {threshold:.3e}")]
    DegenerateCorrector { j_abs: f64, threshold: f64 },
    #[error("method error: {0}")]
    Method(String),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("schema version mismatch: expected {expected}, found {found}")]
    Schema { expected: String, found: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
