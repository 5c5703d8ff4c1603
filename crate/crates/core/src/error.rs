use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("loss must be a scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),

    #[error("non-finite gradient in parameter `{0}`")]
    NonFiniteGradient(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("misaligned example ids: {0:?}")]
    Alignment(Vec<String>),

    #[error("incompatible checkpoint: {0}")]
    IncompatibleCheckpoint(String),

    #[error("refusing to overwrite {0} (pass --force)")]
    WouldOverwrite(PathBuf),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable reason code, used as the CLI exit message prefix.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Shape { .. } => "SHAPE_MISMATCH",
            Error::Degenerate(_) => "DEGENERATE_INPUT",
            Error::InvalidArgument(_) => "INVALID_ARGUMENT",
            Error::NonScalarLoss(_) => "NON_SCALAR_LOSS",
            Error::NonFiniteGradient(_) => "NON_FINITE_GRADIENT",
            Error::NonFiniteLoss { .. } => "NON_FINITE_LOSS",
            Error::Format { .. } => "FORMAT_ERROR",
            Error::Config(_) => "CONFIG_INVALID",
            Error::UndefinedMetric(_) => "UNDEFINED_METRIC",
            Error::Alignment(_) => "ALIGNMENT_ERROR",
            Error::IncompatibleCheckpoint(_) => "INCOMPATIBLE_CHECKPOINT",
            Error::WouldOverwrite(_) => "WOULD_OVERWRITE",
            Error::Io { .. } => "IO_ERROR",
            Error::Json(_) => "JSON_ERROR",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(op: &'static str, left: &[usize], right: &[usize]) -> Self {
        Error::Shape {
            op,
            left: left.to_vec(),
            right: right.to_vec(),
        }
    }
}
