use std::io;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate document id `{0}`")]
    DuplicateDocId(String),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("empty index: collection has no tokens")]
    EmptyIndex,

    #[error("empty document `{0}`")]
    EmptyDocument(String),

    #[error("empty query `{0}`")]
    EmptyQuery(String),

    #[error("empty ranked list for query `{0}`: no feedback possible")]
    NoFeedback(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("version mismatch: expected {expected}, found {found}")]
    VersionMismatch { expected: u8, found: u8 },

    #[error("truncated file: {0}")]
    Truncated(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate entry at line {line}: {message}")]
    Duplicate { line: usize, message: String },

    #[error("query `{0}` absent from qrels")]
    MissingQuery(String),

    #[error("key sets differ; symmetric difference: {0:?}")]
    KeyMismatch(Vec<String>),

    #[error("mismatched query ids: `{0}` vs `{1}`")]
    QueryMismatch(String, String),

    #[error("degenerate labels: training set needs both classes")]
    DegenerateLabels,

    #[error("too few training scores: need at least {needed}, got {got}")]
    TooFewScores { needed: usize, got: usize },

    #[error("wrong slot count: expected {expected} documents, got {got}")]
    SlotCount { expected: usize, got: usize },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Short, stable kind tag for machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DuplicateDocId(_) => "duplicate_doc_id",
            Error::EmptyCorpus => "empty_corpus",
            Error::EmptyIndex => "empty_index",
            Error::EmptyDocument(_) => "empty_document",
            Error::EmptyQuery(_) => "empty_query",
            Error::NoFeedback(_) => "no_feedback",
            Error::EmptyInput(_) => "empty_input",
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::Format(_) => "format",
            Error::VersionMismatch { .. } => "version_mismatch",
            Error::Truncated(_) => "truncated",
            Error::Parse { .. } => "parse",
            Error::Duplicate { .. } => "duplicate",
            Error::MissingQuery(_) => "missing_query",
            Error::KeyMismatch(_) => "key_mismatch",
            Error::QueryMismatch(..) => "query_mismatch",
            Error::DegenerateLabels => "degenerate_labels",
            Error::TooFewScores { .. } => "too_few_scores",
            Error::SlotCount { .. } => "slot_count",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
