use thiserror::Error;

pub type Result<T> = std::result::Result<T, ModelError>;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("graph has no recorded operations for backward")]
    Detached,
    #[error("empty split: {0}")]
    EmptySplit(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(#[from] nvi_core::Error),
}

pub(crate) fn shape_err(expected: impl Into<String>, actual: impl Into<String>) -> ModelError {
    ModelError::Shape {
        expected: expected.into(),
        actual: actual.into(),
    }
}
