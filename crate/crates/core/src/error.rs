use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent user input (lattice spec, schedule, config file).
    #[error("configuration error: {0}")]
    Config(String),

    /// A parameter outside the domain where a quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Basis dimension or dense-matrix size above the configured limit.
    #[error("resource limit exceeded: {what} = {requested} > {limit}")]
    Resource {
        what: &'static str,
        requested: usize,
        limit: usize,
    },

    /// A state or amplitude does not fit inside the truncated Fock space.
    #[error("truncation error: {0}")]
    Truncation(String),

    /// Two objects live on different bases or have mismatched sizes.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("numerical failure at step {step}: {reason}")]
    Numerical { step: usize, reason: String },

    #[error("integration quality: {0}")]
    IntegrationQuality(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    /// Calibration scan found its optimum on the window boundary.
    #[error("no interior maximum in calibration window [{lo:.6e}, {hi:.6e}] s; widen the window")]
    WidenWindow { lo: f64, hi: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn dimension(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
