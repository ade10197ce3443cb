use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// The graph (or the part of it a solve needs) is not connected.
    #[error("graph is disconnected: {components} components (sizes {sizes:?})")]
    Disconnected { components: usize, sizes: Vec<usize> },

    #[error("{nodes} unlabeled node(s) cannot reach any labeled node; the unlabeled block is singular")]
    UnreachableUnlabeled { nodes: usize },

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("dense oracle limited to n <= {cap}, got n = {n}")]
    SizeCap { n: usize, cap: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for failures of the numerics (disconnection, non-convergence)
    /// as opposed to bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Disconnected { .. } | Error::UnreachableUnlabeled { .. } | Error::NotConverged { .. }
        )
    }
}
