//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input file; `line` is 1-based.
    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    /// Attribute count above the configured memory guard.
    #[error("n={n} attributes exceeds the cap of {cap}; the engine would allocate O(n*2^n) table entries")]
    CapExceeded { n: usize, cap: usize },

    /// Problem size above a hard guard of a reference-only routine.
    #[error("{0}")]
    GuardExceeded(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("integer overflow in {0}")]
    Overflow(&'static str),

    /// The flat contingency array for one family would not fit.
    #[error("contingency table for node {node} needs {cells} cells, above the cap of {cap}")]
    ContingencyTooLarge { node: usize, cells: u128, cap: usize },

    /// Upward transform input carries mass above the truncation bound.
    #[error("subset-sum transform input has nonzero mass at {set} with {card} > {k} elements")]
    TruncationSupport { set: String, card: usize, k: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Json { path: PathBuf, message: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
