use thiserror::Error;

/// Errors raised by ingestion, model evaluation, solving and training.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: malformed edge record: {reason}")]
    Malformed { line: usize, reason: String },

    #[error("line {line}: non-finite weight")]
    NonFiniteWeight { line: usize },

    #[error("line {line}: self-loop on node {node}")]
    SelfLoop { line: usize, node: String },

    #[error("conflicting duplicate edge ({u}, {i}): weight {first} vs {second}")]
    ConflictingDuplicate {
        u: usize,
        i: usize,
        first: f64,
        second: f64,
    },

    #[error("node index {node} out of range for {node_count} nodes")]
    NodeOutOfRange { node: usize, node_count: usize },

    #[error("network has no edges")]
    EmptyNetwork,

    #[error("too few edges: {reason}")]
    TooFewEdges { reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("vector length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
