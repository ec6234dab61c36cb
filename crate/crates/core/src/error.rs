use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("point ({x:.4}, {y:.4}, {z:.4}) lies outside the grid domain")]
    OutOfDomain { x: f64, y: f64, z: f64 },
    #[error("buffered free space is empty; nothing to solve on")]
    EmptyInterior,
    #[error("grid geometry mismatch: {0}")]
    GeometryMismatch(&'static str),
    #[error("no published safety field")]
    MissingField,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
