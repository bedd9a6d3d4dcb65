use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    UnreadableFile {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    UnwritablePath {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported codec in {path}: {detail}")]
    UnsupportedCodec { path: PathBuf, detail: String },
    #[error("truncated data chunk in {path}: {detail}")]
    TruncatedData { path: PathBuf, detail: String },
    #[error("channel {channel} out of range (clip has {channel_count})")]
    ChannelOutOfRange { channel: usize, channel_count: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("unknown label '{0}'")]
    UnknownLabel(String),
    #[error("unknown clip id '{0}'")]
    UnknownClipId(String),
    #[error("clip length mismatch: {expected} vs {actual} frames")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("sample rate mismatch: {expected} Hz vs {actual} Hz")]
    SampleRateMismatch { expected: u32, actual: u32 },
    #[error("nothing to evaluate: both truth and estimate stem sets are empty")]
    NothingToEvaluate,
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("backend failure for label '{label}': {source}")]
    BackendLabel {
        label: String,
        #[source]
        source: Box<Error>,
    },
    #[error("backend process error: {0}")]
    BackendProcess(String),
    #[error("backend protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("backend response failed validation: {0}")]
    ResponseValidation(String),
    #[error("backend request timed out after {0:?}")]
    BackendTimeout(std::time::Duration),
    #[error("manifest parse error at line {line}: {detail}")]
    ManifestParse { line: usize, detail: String },
    #[error("insufficient source pool: {0}")]
    InsufficientPool(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
