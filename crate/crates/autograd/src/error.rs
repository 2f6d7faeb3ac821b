use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutogradError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("gradient requested of a non-scalar output of shape {0:?}")]
    NonScalarOutput(Vec<usize>),
    #[error("optimizer state does not match parameters: {0}")]
    OptimizerState(String),
}

pub type Result<T> = std::result::Result<T, AutogradError>;
