use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A state component became non-finite during integration.
    #[error("integration blew up at inner step {step} (t = {time}); |u| = {norm}")]
    BlowUp { step: usize, time: f64, norm: f64 },

    #[error("J = {dim} is not divisible by {divisor} (required by operator {kind})")]
    Divisibility {
        dim: usize,
        divisor: usize,
        kind: &'static str,
    },

    #[error("symmetric eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("innovation covariance is singular")]
    SingularInnovation,

    /// The ExKF covariance lost positive semidefiniteness beyond round-off.
    #[error("covariance lost positive semidefiniteness at step {step}: min eigenvalue {min_eig:e} (|C| = {norm:e})")]
    CovarianceNotPsd { step: usize, min_eig: f64, norm: f64 },

    #[error("reduced-rank forecast factor collapsed at step {step}: condition number {cond:e}")]
    RankCollapse { step: usize, cond: f64 },

    #[error("QR re-orthonormalization degenerated: {0}")]
    DegenerateQr(String),

    #[error("bound function overflow: {0}")]
    Overflow(String),

    #[error("search found no feasible point: {0}")]
    Infeasible(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerics (as opposed to usage or I/O).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::BlowUp { .. }
                | Error::Eigensolver(_)
                | Error::SingularInnovation
                | Error::CovarianceNotPsd { .. }
                | Error::RankCollapse { .. }
                | Error::DegenerateQr(_)
                | Error::Overflow(_)
                | Error::Infeasible(_)
        )
    }
}
