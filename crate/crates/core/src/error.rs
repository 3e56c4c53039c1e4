use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by model construction, reduction, and enrichment.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("interface incoherence: {0}")]
    InterfaceIncoherence(String),

    #[error("format error in {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("validity error: {0}")]
    Validity(String),

    #[error("matrix is not positive definite: {0}")]
    Definiteness(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("rank-deficient reduction basis (condition number {condition_number:.3e})")]
    Conditioning { condition_number: f64 },

    #[error(
        "dynamic stiffness of component {component} is near-singular at {requested_hz:.6} Hz \
         (fixed-interface eigenfrequency {eigen_hz:.6} Hz)"
    )]
    NearSingular {
        component: usize,
        requested_hz: f64,
        eigen_hz: f64,
    },

    #[error("singular matrix during factorization: {0}")]
    Singular(String),

    #[error("no interface direction has a singular value above {threshold}")]
    EmptyBasis { threshold: f64 },

    #[error("stale database: stored fingerprint {stored}, components give {actual}")]
    StaleDatabase { stored: String, actual: String },

    #[error("undefined MAC entry: {0} is a zero vector")]
    UndefinedMac(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
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
}
