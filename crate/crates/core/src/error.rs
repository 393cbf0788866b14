use std::path::{Path, PathBuf};

/// Errors surfaced by the toolkit. Shape and arity violations inside the
/// autodiff graph are programming errors and panic instead.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error in {what} at byte {offset}: {msg}")]
    Parse {
        what: String,
        offset: u64,
        msg: String,
    },

    #[error("ingestion error: {0}")]
    Ingest(String),

    #[error("lookup error: {0}")]
    Lookup(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("non-deterministic function: {0}")]
    NonDeterministic(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn file(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        Error::File {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn parse(what: impl Into<String>, offset: u64, msg: impl Into<String>) -> Self {
        Error::Parse {
            what: what.into(),
            offset,
            msg: msg.into(),
        }
    }

    /// Short category label used for the CLI's error line.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::File { .. } | Error::Io(_) => "io",
            Error::Parse { .. } | Error::Json(_) => "parse",
            Error::Ingest(_) => "ingest",
            Error::Lookup(_) => "lookup",
            Error::Contract(_) => "contract",
            Error::Training(_) => "training",
            Error::NonDeterministic(_) => "nondeterminism",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
