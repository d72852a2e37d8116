use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: self-loop on node {node}")]
    SelfLoop { line: usize, node: usize },

    #[error("input contains no data")]
    Empty,

    #[error("node index {index} out of range for a graph with {n} nodes")]
    NodeOutOfRange { index: usize, n: usize },

    #[error("node {0} listed more than once")]
    DuplicateNode(usize),

    #[error("need at least {min} nodes, got {got}")]
    TooFewNodes { min: usize, got: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("eigenvalues are not sorted ascending at position {0}")]
    Unsorted(usize),

    #[error("window {window} too large for a gap sequence of length {len}")]
    WindowTooLarge { window: usize, len: usize },

    #[error("invalid interval [{a}, {b}) for spectrum of size {n}")]
    InvalidInterval { a: usize, b: usize, n: usize },

    #[error("bound not applicable: {0}")]
    NotApplicable(String),

    #[error("mask is empty")]
    EmptyMask,

    #[error("invalid configuration field `{field}`: {message}")]
    Config { field: &'static str, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite {what} at epoch {epoch}")]
    Diverged { what: &'static str, epoch: usize },

    #[error("eigensolver failed: {0}")]
    Linalg(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(field: &'static str, message: impl Into<String>) -> Self {
        Error::Config {
            field,
            message: message.into(),
        }
    }
}
