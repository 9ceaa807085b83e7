use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("argument {value} outside the kernel domain [-1, 1]")]
    Domain { value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("vector {index} is not unit norm (norm = {norm})")]
    NotUnitNorm { index: usize, norm: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("coefficient mean mu_a is required and must be nonzero")]
    MissingMeanCoefficient,

    #[error("no simplex frame of {m} vectors exists in dimension {d} (need m <= d + 1)")]
    FrameTooLarge { m: usize, d: usize },

    #[error("rotation is not orthogonal (max deviation {0:e})")]
    NotOrthogonal(f64),

    #[error("matrix is singular")]
    Singular,

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("parse error at line {line}, column {column}: {msg}")]
    Parse { line: usize, column: usize, msg: String },

    #[error("invalid document field `{field}`: {msg}")]
    Invariant { field: String, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
