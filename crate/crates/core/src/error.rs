use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the analysis library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value at site {site}, time index {time}")]
    NonFinite { site: usize, time: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("scale {scale} is not resolvable: {reason}")]
    UnresolvableScale { scale: f64, reason: String },

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("matrix is not Hermitian (relative asymmetry {0:e})")]
    NotHermitian(f64),

    #[error("vectors are not orthonormal: {0}")]
    NotOrthonormal(String),

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("phase field is not planar (fit rms {0:.3} rad)")]
    NonPlanarPhase(f64),

    #[error("infeasible variance shares: {0}")]
    InfeasibleShares(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
