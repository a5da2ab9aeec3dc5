use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: line {line}: {message}")]
    Record {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: byte offset {offset}: {message}")]
    Binary {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    #[error("invalid {what}: {message}")]
    Invalid { what: &'static str, message: String },

    #[error("no well-formed [label, excerpt, score] array found in response")]
    UnparseableResponse,

    #[error("transport error: {0}")]
    Transport(String),

    #[error("every review failed extraction ({0} reviews)")]
    AllReviewsFailed(usize),

    #[error("dimension mismatch: expected {expected}, found {found} (record {index})")]
    DimMismatch {
        expected: usize,
        found: usize,
        index: usize,
    },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("empty corpus: no reviews")]
    EmptyCorpus,

    #[error("design matrix has no usable column")]
    RankZero,

    #[error("not enough observations: n = {n}, parameters = {params}")]
    InsufficientData { n: usize, params: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("cannot place {topics} near-orthogonal centroids in {dim} dimensions")]
    InfeasibleSeparation { topics: usize, dim: usize },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(what: &'static str, message: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            message: message.into(),
        }
    }
}
