use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("regularity exponent alpha={0} must lie in (1/3, 1)")]
    AlphaOutOfRange(f64),

    #[error("layer exponent a={a} must satisfy 1 < a < 3/(5-6*alpha) = {limit:.6} for alpha={alpha}")]
    LayerExponent { a: f64, alpha: f64, limit: f64 },

    #[error("integrability exponent p={p} must exceed 6/(3*alpha-1) = {limit:.6} for alpha={alpha}")]
    StripExponent { p: f64, alpha: f64, limit: f64 },

    #[error("layer ordering fails at nu={nu}: {violation}")]
    LayerOrdering { nu: f64, violation: String },

    #[error("strip of width {width:.3e} holds {cells} cells, at least {required} required")]
    UnderResolved {
        width: f64,
        cells: usize,
        required: usize,
    },

    #[error("evaluation at wall distance {distance:.3e} lies inside the mollification strip of width {epsilon:.3e}")]
    InsideStrip { distance: f64, epsilon: f64 },

    #[error("solver diverged at t={time}: {reason}")]
    Diverged { time: f64, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("manifest mismatch:\n{0}")]
    ManifestMismatch(String),

    #[error("incompatible inputs: {0}")]
    Incompatible(String),

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used for process exit codes and FFI status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// The inputs are unusable: bad exponents, ladders, grids or config files.
    Config,
    /// A computation or the file system failed.
    Run,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidArgument(_)
            | Error::AlphaOutOfRange(_)
            | Error::LayerExponent { .. }
            | Error::StripExponent { .. }
            | Error::LayerOrdering { .. }
            | Error::UnderResolved { .. }
            | Error::Config(_)
            | Error::ManifestMismatch(_)
            | Error::Incompatible(_) => ErrorClass::Config,
            Error::InsideStrip { .. } | Error::Diverged { .. } | Error::Io { .. } | Error::Format { .. } => {
                ErrorClass::Run
            }
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
