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

    #[error("manifest header mismatch: expected `{expected}`, found `{found}`")]
    MalformedHeader { expected: String, found: String },

    #[error("line {line}: {reason}")]
    BadRow { line: usize, reason: String },

    #[error("embedding file does not start with the EMB1 magic")]
    BadMagic,

    #[error("embedding header is invalid: {0}")]
    InvalidHeader(String),

    #[error("embedding file is {actual} bytes, header promises {expected}")]
    TruncatedFile { expected: u64, actual: u64 },

    #[error("non-finite embedding value at flat index {index}")]
    NonFiniteValue { index: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("vector has zero Euclidean norm")]
    ZeroNorm,

    #[error("embedding index {index} out of range for store of {count} vectors")]
    IndexOutOfRange { index: usize, count: usize },

    #[error("unknown image id `{0}`")]
    UnknownImage(String),

    #[error("group {group} has {have} eligible identities, {need} required")]
    InsufficientIdentities { group: String, have: usize, need: usize },

    #[error("both distributions have zero standard deviation")]
    DegenerateDistributions,

    #[error("need at least {need} samples, got {have}")]
    InsufficientSamples { need: usize, have: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("no probe has both a mated and a non-mated score")]
    NoMatedProbes,

    #[error("no observed score reaches a false match rate of at most {target}")]
    Unachievable { target: f64 },

    #[error("expected a {expected}x{expected} image, got {width}x{height}")]
    BadDimensions { expected: u32, width: u32, height: u32 },

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dataset failed validation: {0}")]
    ValidationFailed(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable variant name, used in machine-readable CLI errors.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "Io",
            Error::MalformedHeader { .. } => "MalformedHeader",
            Error::BadRow { .. } => "BadRow",
            Error::BadMagic => "BadMagic",
            Error::InvalidHeader(_) => "InvalidHeader",
            Error::TruncatedFile { .. } => "TruncatedFile",
            Error::NonFiniteValue { .. } => "NonFiniteValue",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::ZeroNorm => "ZeroNorm",
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::UnknownImage(_) => "UnknownImage",
            Error::InsufficientIdentities { .. } => "InsufficientIdentities",
            Error::DegenerateDistributions => "DegenerateDistributions",
            Error::InsufficientSamples { .. } => "InsufficientSamples",
            Error::EmptyInput => "EmptyInput",
            Error::NoMatedProbes => "NoMatedProbes",
            Error::Unachievable { .. } => "Unachievable",
            Error::BadDimensions { .. } => "BadDimensions",
            Error::InvalidImage(_) => "InvalidImage",
            Error::InvalidSpec(_) => "InvalidSpec",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::ValidationFailed(_) => "ValidationFailed",
            Error::Json(_) => "Json",
            Error::Image(_) => "Image",
        }
    }

    /// True for errors caused by malformed or inconsistent input data.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::MalformedHeader { .. }
                | Error::BadRow { .. }
                | Error::BadMagic
                | Error::InvalidHeader(_)
                | Error::TruncatedFile { .. }
                | Error::NonFiniteValue { .. }
                | Error::ValidationFailed(_)
                | Error::InvalidSpec(_)
        )
    }
}
