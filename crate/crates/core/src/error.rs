use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to parse data file {name}: {message}")]
    DataFile { name: String, message: String },

    #[error("union of required obligations needs at least one modification term")]
    EmptyTerms,

    #[error("{path} is not a git repository")]
    NotARepository { path: PathBuf },

    #[error("git {args} failed in {path}: {stderr}")]
    Git {
        path: PathBuf,
        args: String,
        stderr: String,
    },

    #[error("unknown revision `{rev}` in {path}")]
    UnknownRevision { path: PathBuf, rev: String },

    #[error("`{path}` does not exist at revision {rev}")]
    NotFound { rev: String, path: String },

    #[error("base and fork share no history; pass --fork-point")]
    NoCommonAncestor,

    #[error("{path} has no working tree to write notice files into")]
    BareFork { path: PathBuf },

    #[error("label mismatch: {0}")]
    LabelMismatch(String),

    #[error("invalid labels file line {line}: {message}")]
    Labels { line: usize, message: String },

    #[error("threshold {0} is outside [0, 1]")]
    Threshold(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
