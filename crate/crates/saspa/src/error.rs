//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by model construction, inference, and I/O.
#[derive(Debug, Error)]
pub enum SaspaError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix is not symmetric positive semi-definite: {0}")]
    NotPsd(String),

    #[error("Cholesky factorization failed after escalating jitter to {final_jitter:.3e}; the basis is ill-conditioned (e.g. duplicate centers)")]
    FactorizationFailed { final_jitter: f64 },

    #[error("negative predicted variance {var:.3e}: inference is unstable")]
    NegativeVariance { var: f64 },

    #[error("degenerate cavity: denominator {denom:.3e} within 1e-12 of zero")]
    DegenerateCavity { denom: f64 },

    #[error("negative cavity variance {var:.3e}")]
    NegativeCavityVariance { var: f64 },

    #[error("degenerate site: likelihood variance {var:.3e} is not positive")]
    DegenerateSite { var: f64 },

    #[error("nonfinite message proposal (g = {g}, tau = {tau})")]
    NonfiniteProposal { g: f64, tau: f64 },

    #[error("expectation propagation diverged: all {sites} sites skipped in sweep {sweep}")]
    EpDiverged { sweep: usize, sites: usize },

    #[error("data error: {0}")]
    Data(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    CsvCell {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("task mismatch: model is {model}, data is {data}")]
    TaskMismatch { model: String, data: String },

    #[error("model file error: {0}")]
    ModelFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, SaspaError>;
