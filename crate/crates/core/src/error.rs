use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("degenerate edge {edge}: length {length:e} is below the minimum")]
    DegenerateEdge { edge: usize, length: f64 },

    #[error("antiparallel tangents at edge {edge}: rotation between them is undefined")]
    AntiparallelTangents { edge: usize },

    #[error("singular banded matrix (pivot {pivot})")]
    SingularMatrix { pivot: usize },

    #[error("implicit step failed: {reason} (residual {residual:e})")]
    StepFailure { reason: &'static str, residual: f64 },

    #[error("explicit integration unstable at dof {dof} (value {value:e})")]
    Instability { dof: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid task spec: {0}")]
    InvalidSpec(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
