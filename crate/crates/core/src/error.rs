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

    #[error("{path}: malformed record at line {line}: {message}")]
    MalformedRecord {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate doc_id \"{0}\"")]
    DuplicateDocId(String),

    #[error("document \"{0}\" has empty text")]
    EmptyText(String),

    #[error("document \"{doc_id}\" has no company mapping")]
    UnknownCompany { doc_id: String },

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("rank k={k} out of range [1, {max}]")]
    RankOutOfRange { k: usize, max: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value detected in {0}")]
    NonFinite(String),

    #[error("singular value decomposition failed: {0}")]
    Svd(String),

    #[error("silhouette requires at least two distinct clusters")]
    SingleCluster,

    #[error("need at least {needed} samples, found {found}")]
    TooFewSamples { needed: usize, found: usize },

    #[error("list length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("requested {requested} terms but vocabulary has only {available}")]
    TooManyTerms { requested: usize, available: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
