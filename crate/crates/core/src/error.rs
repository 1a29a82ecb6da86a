use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("link {link} references node {node}, but the graph has {nodes} nodes")]
    DanglingEndpoint { link: usize, node: usize, nodes: usize },

    #[error("link {link} has non-positive or non-finite length {length}")]
    NonPositiveLength { link: usize, length: f64 },

    #[error("link {link} is a self-loop on node {node}")]
    SelfLoop { link: usize, node: usize },

    #[error("graph is not strongly connected: node {node} is unreachable from node {from}")]
    Disconnected { from: usize, node: usize },

    #[error("series length mismatch: {0}")]
    LengthMismatch(String),

    #[error("series of length {len} is too short (need at least {needed})")]
    TooShort { len: usize, needed: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("hessian is not positive definite")]
    NotPositiveDefinite,

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("undefined: {0}")]
    Undefined(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }
}
