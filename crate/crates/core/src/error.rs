use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("design error: {0}")]
    Design(String),

    #[error("surrogate fit failed: {message}")]
    Fit {
        message: String,
        /// Rough condition estimate of the correlation matrix, when relevant.
        condition: Option<f64>,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("selection failed: {0}")]
    Selection(String),

    #[error("benchmark #{id} is out of scope: {reason}")]
    OutOfScope { id: u32, reason: String },

    #[error("simulation error: {0}")]
    Simulation(String),

    #[error("no cost-efficient point: {0}")]
    NoCostEfficientPoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
