use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Error, Debug)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("series did not converge within {terms} terms (x = {x})")]
    NonConvergence { terms: usize, x: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("training diverged in stage `{stage}` at epoch {epoch}; last finite loss {last_finite:?}")]
    Divergence {
        stage: String,
        epoch: usize,
        last_finite: Option<f64>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown system `{name}`; available: {}", available.join(", "))]
    UnknownSystem { name: String, available: Vec<String> },

    #[error("dataset has no grouping of records by initial point")]
    MissingGrouping,

    #[error("group {group} has {size} records; at least {min} required")]
    GroupTooSmall { group: usize, size: usize, min: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit code for the command-line front end: 2 for
    /// configuration and validation problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonConvergence { .. } | Error::Numerical(_) | Error::Divergence { .. } => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
