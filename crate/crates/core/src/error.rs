use std::path::PathBuf;

use chrono::NaiveDate;

/// Errors produced anywhere in the simulator.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("input starts with a UTF-8 byte order mark; strip it and retry")]
    ByteOrderMark,

    #[error("malformed record at line {line}: {message}")]
    MalformedRecord { line: usize, message: String },

    #[error("empty label set at line {line}")]
    EmptyLabelSet { line: usize },

    #[error("unparseable date {value:?} at line {line}")]
    BadDate { line: usize, value: String },

    #[error("duplicate id {id:?} at line {line}")]
    DuplicateId { line: usize, id: String },

    #[error("label {label:?} is not in the label space")]
    UnknownLabel { label: String },

    #[error("invalid label space: {0}")]
    InvalidLabelSpace(String),

    #[error("invalid date range: from {from} must be before to {to}")]
    EmptyDateRange { from: NaiveDate, to: NaiveDate },

    #[error("degenerate split: {0}")]
    DegenerateSplit(String),

    #[error("invalid ratio: {0}")]
    InvalidRatio(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("drift event outside corpus span: {0}")]
    DriftOutsideSpan(NaiveDate),

    #[error("length mismatch: {predictions} predictions vs {gold} gold label sets")]
    LengthMismatch { predictions: usize, gold: usize },

    #[error("training diverged: non-finite loss {loss} at epoch {epoch}")]
    NonFiniteLoss { epoch: usize, loss: f64 },

    #[error("model label space does not match (expected hash {expected:016x}, found {found:016x})")]
    LabelSpaceMismatch { expected: u64, found: u64 },

    #[error("unsupported model file version {0}")]
    ModelVersion(u32),

    #[error("window end {window_end} is before corpus start {corpus_start}")]
    WindowBeforeStart {
        window_end: NaiveDate,
        corpus_start: NaiveDate,
    },

    #[error("missing run artifact: {0}")]
    MissingArtifact(PathBuf),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("toml error: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
