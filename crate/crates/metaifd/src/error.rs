use std::io;
use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("line {line}: invalid address `{address}`")]
    InvalidAddress { line: usize, address: String },
    #[error("line {line}: negative value `{value}`")]
    NegativeValue { line: usize, value: String },
    #[error("line {line}: unknown interaction kind `{kind}`")]
    UnknownKind { line: usize, kind: String },
    #[error("checksum mismatch: header says {expected}, content hashes to {found}")]
    ChecksumMismatch { expected: String, found: String },
    #[error("unsupported version `{0}`")]
    VersionUnsupported(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Core(#[from] metaifd_core::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable machine-readable name used in error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::MalformedRow { .. } => "malformed_row",
            Error::InvalidAddress { .. } => "invalid_address",
            Error::NegativeValue { .. } => "negative_value",
            Error::UnknownKind { .. } => "unknown_kind",
            Error::ChecksumMismatch { .. } => "checksum_mismatch",
            Error::VersionUnsupported(_) => "version_unsupported",
            Error::Config(_) => "config",
            Error::Json(_) => "json",
            Error::Core(e) => match e {
                metaifd_core::Error::InvalidAddress(_) => "invalid_address",
                metaifd_core::Error::UnknownKind(_) => "unknown_kind",
                metaifd_core::Error::TypeConflict(_) => "type_conflict",
                metaifd_core::Error::UnknownAccount(_) => "unknown_account",
                metaifd_core::Error::InvalidCombination { .. } => "invalid_combination",
                metaifd_core::Error::NonFiniteInput { .. } => "non_finite_input",
                metaifd_core::Error::DimensionMismatch { .. } => "dimension_mismatch",
                metaifd_core::Error::EmptyBatch => "empty_batch",
                metaifd_core::Error::NoEdges => "no_edges",
                metaifd_core::Error::HeadDivisibility { .. } => "head_divisibility",
                metaifd_core::Error::InsufficientLabels { .. } => "insufficient_labels",
                metaifd_core::Error::Config(_) => "config",
            },
        }
    }
}
