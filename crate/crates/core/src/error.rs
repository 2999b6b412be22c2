use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = EditError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum EditError {
    /// A value lies outside the domain of an operation (label index, epoch, blend factor).
    #[error("domain error: {0}")]
    Domain(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("checkpoint format error: {0}")]
    Format(String),
    #[error("checkpoint integrity error: {0}")]
    Integrity(String),
    #[error("data error: {path}: {reason}")]
    Data { path: PathBuf, reason: String },
    #[error("usage error: {0}")]
    Usage(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("tensor error: {0}")]
    Tensor(#[from] candle_core::Error),
}

impl EditError {
    pub fn shape(msg: impl Into<String>) -> Self {
        Self::Shape(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Self::Domain(msg.into())
    }

    pub fn data(path: impl Into<PathBuf>, reason: impl ToString) -> Self {
        Self::Data {
            path: path.into(),
            reason: reason.to_string(),
        }
    }

    /// The message without the kind prefix.
    pub fn message(&self) -> String {
        match self {
            Self::Domain(m)
            | Self::Shape(m)
            | Self::Numeric(m)
            | Self::Config(m)
            | Self::Format(m)
            | Self::Integrity(m)
            | Self::Usage(m) => m.clone(),
            Self::Data { path, reason } => format!("{}: {reason}", path.display()),
            Self::Io(e) => e.to_string(),
            Self::Tensor(e) => e.to_string(),
        }
    }

    /// Short machine-readable tag used as an error prefix by front ends.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Domain(_) => "domain",
            Self::Shape(_) => "shape",
            Self::Numeric(_) => "numeric",
            Self::Config(_) => "config",
            Self::Format(_) => "format",
            Self::Integrity(_) => "integrity",
            Self::Data { .. } => "data",
            Self::Usage(_) => "usage",
            Self::Io(_) => "io",
            Self::Tensor(_) => "tensor",
        }
    }
}
