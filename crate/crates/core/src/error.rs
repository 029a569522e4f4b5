use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("normal equations are rank deficient")]
    RankDeficient,

    #[error("divergence at t={t}: {reason} (step {step:e}, block {block:?})")]
    Divergence {
        t: u64,
        step: f64,
        block: Option<usize>,
        reason: String,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("iteration {t}: {source}")]
    AtIteration {
        t: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("bounded staleness violated: delay {delay} exceeds {max}")]
    Staleness { delay: u64, max: u64 },

    #[error("worker stalled for more than {0:?}")]
    Stalled(std::time::Duration),

    #[error("{path}: parse error at byte offset {offset}: {msg}")]
    Parse {
        path: PathBuf,
        offset: u64,
        msg: String,
    },

    #[error("{path}:{line}: {msg}")]
    MalformedRow {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at(self, t: u64) -> Self {
        match self {
            e @ Error::AtIteration { .. } => e,
            e @ Error::Divergence { .. } => e,
            e => Error::AtIteration {
                t,
                source: Box::new(e),
            },
        }
    }
}
