use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{0}: no edges found")]
    EmptyGraph(PathBuf),

    #[error("unknown relation `{name}` (available: {})", available.join(", "))]
    UnknownRelation { name: String, available: Vec<String> },

    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),

    #[error("no negative space left: every in-scope source is saturated ({} sources)", sources.len())]
    Saturated { sources: Vec<String> },

    #[error("relation `{rel}`: expected dimensions {expected}, got {got}")]
    DimensionMismatch {
        rel: String,
        expected: String,
        got: String,
    },

    #[error("embedding error: {0}")]
    Embedding(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error("numerical error: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    /// True for failures of the optimizer or linear algebra, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_))
    }
}
