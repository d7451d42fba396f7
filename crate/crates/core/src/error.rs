use std::path::PathBuf;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty corpus")]
    EmptyCorpus,

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    /// Structural or argument validation failure (bad forest, shape
    /// mismatch, OOV query, mutually exclusive options, ...).
    #[error("{0}")]
    Validation(String),

    /// A token could not be resolved through the vocabulary even after
    /// rare/number mapping. Indicates a vocab/corpus mismatch.
    #[error("internal error: {0}")]
    Internal(String),

    #[error("divergence; reduce eta0")]
    Divergence,

    /// Rank correlation is undefined when one of the lists is constant.
    #[error("degenerate ranking")]
    DegenerateRanking,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
