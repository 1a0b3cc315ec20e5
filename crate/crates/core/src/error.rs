use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the graph store and by vocabulary parsing.
#[derive(Debug, Error)]
pub enum GraphError {
    #[error("unknown relation `{0}` (not in the closed vocabulary)")]
    UnknownRelation(String),
    #[error("unknown entity category `{0}`")]
    UnknownCategory(String),
    #[error("entity name is empty after normalization")]
    EmptyEntity,
    #[error("strength {0} is not one of 3, 5, 7")]
    InvalidStrength(u8),
    #[error("unknown entity `{0}`")]
    UnknownEntity(String),
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("hub fraction {0} is outside (0, 1]")]
    InvalidFraction(f64),
    #[error("schema error at line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl GraphError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GraphError::Io {
            path: path.into(),
            source,
        }
    }
}

/// Failure reported by an LLM-backed client (judge or generator).
#[derive(Debug, Clone, Error)]
pub enum ClientError {
    #[error("client `{client}` unavailable: {message}")]
    Unavailable { client: String, message: String },
    #[error("client `{client}` has no recorded response for this prompt")]
    ReplayMiss { client: String },
}
