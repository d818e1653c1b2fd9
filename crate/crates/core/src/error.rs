use std::path::PathBuf;

/// Errors raised anywhere in the explanation pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("input text is empty")]
    EmptyInput,
    #[error("no perturbable features")]
    NoFeatures,
    #[error("unknown perturbation strategy `{0}`")]
    UnknownStrategy(String),
    #[error("unknown comparator `{0}`")]
    UnknownComparator(String),
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("backend protocol error: {0}")]
    BackendProtocol(String),
    #[error("dimension mismatch: {left} vs {right}")]
    Dimension { left: usize, right: usize },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("cannot ingest {path}: {reason}")]
    Ingest { path: PathBuf, reason: String },
    #[error("duplicate document id `{0}`")]
    DuplicateId(String),
    #[error("malformed prompt template: {0}")]
    Template(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite value in {0}")]
    Numeric(&'static str),
    #[error("stale result: stored score {stored} but recomputed {recomputed}")]
    StaleResult { stored: f64, recomputed: f64 },
    #[error("metric undefined: {0}")]
    UndefinedMetric(String),
    #[error("annotation source text does not match the explanation")]
    AnnotationMismatch,
    #[error("not found: {0}")]
    NotFound(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("index file error: {0}")]
    IndexFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used for CLI exit codes and HTTP status mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Backend,
    Data,
}

impl Error {
    /// Stable snake_case code carried in `{code, message}` error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            Error::EmptyInput => "empty_input",
            Error::NoFeatures => "no_features",
            Error::UnknownStrategy(_) => "unknown_strategy",
            Error::UnknownComparator(_) => "unknown_comparator",
            Error::BackendUnavailable(_) => "backend_unavailable",
            Error::BackendProtocol(_) => "backend_protocol_error",
            Error::Dimension { .. } => "dimension_error",
            Error::EmptyCorpus => "empty_corpus",
            Error::Ingest { .. } => "ingest_error",
            Error::DuplicateId(_) => "duplicate_id",
            Error::Template(_) => "template_error",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Numeric(_) => "numeric_error",
            Error::StaleResult { .. } => "stale_result",
            Error::UndefinedMetric(_) => "undefined_metric",
            Error::AnnotationMismatch => "annotation_mismatch",
            Error::NotFound(_) => "not_found",
            Error::Config(_) => "config_error",
            Error::IndexFormat(_) => "index_format_error",
            Error::Io(_) => "io_error",
            Error::Json(_) => "json_error",
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::BackendUnavailable(_) | Error::BackendProtocol(_) | Error::Dimension { .. } => {
                ErrorClass::Backend
            }
            Error::UnknownStrategy(_)
            | Error::UnknownComparator(_)
            | Error::InvalidArgument(_)
            | Error::Config(_) => ErrorClass::Usage,
            _ => ErrorClass::Data,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
