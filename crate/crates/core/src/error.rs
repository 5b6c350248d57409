use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("derivative order {order} exceeds the configured maximum {max}")]
    OrderOverflow { order: usize, max: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point outside the smooth domain: {0}")]
    Domain(String),

    #[error("non-finite value encountered at a stencil point")]
    NonFinite,

    #[error("metric is degenerate (min eigenvalue {min_eigenvalue:e})")]
    Degenerate { min_eigenvalue: f64 },

    #[error("flag plane is degenerate (gram determinant {gram:e})")]
    DegenerateFlag { gram: f64 },

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
