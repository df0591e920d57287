use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: u64, reason: String },

    #[error("line {line}: row-sum violation: row sums to {sum}, expected 1 within 1e-6")]
    RowSum { line: u64, sum: f64 },

    #[error("line {line}: label {label} out of range for {num_categories} categories")]
    LabelOutOfRange {
        line: u64,
        label: usize,
        num_categories: usize,
    },

    #[error("too few instances: got {got}, need at least 3")]
    TooFewInstances { got: usize },

    #[error("too few categories: got {got}, need at least 2")]
    TooFewCategories { got: usize },

    #[error("invalid confidence matrix: {0}")]
    InvalidMatrix(String),

    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("meta-sets disagree on category count: {first} vs {other}")]
    MixedCategories { first: usize, other: usize },

    #[error("empty group: statistics need at least one member")]
    EmptyGroup,

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported format_version {found} (expected {expected})")]
    Version { found: u64, expected: u64 },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml error: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
