use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported audio format: {0}")]
    Format(String),

    #[error("could not parse {what}: {detail}")]
    Parse { what: String, detail: String },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("degenerate frame: {0}")]
    DegenerateFrame(String),

    #[error("degenerate distances: all pairwise distances are equal")]
    DegenerateDistances,

    #[error("index {index} out of range (len {len})")]
    Index { index: usize, len: usize },

    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    #[error("grouping error: {0}")]
    Grouping(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("join error: missing rows for {}", .missing.join(", "))]
    Join { missing: Vec<String> },

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(what: impl Into<String>, detail: impl ToString) -> Self {
        Error::Parse {
            what: what.into(),
            detail: detail.to_string(),
        }
    }
}
