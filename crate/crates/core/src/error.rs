use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("enumeration budget exceeded: k = {k} > {max}")]
    Budget { k: usize, max: usize },

    #[error("design too large: {blocks} blocks exceeds limit {limit}")]
    TooLarge { blocks: usize, limit: usize },

    #[error("design is outside the competing class: {0}")]
    ClassViolation(String),

    #[error("contrast coefficients must sum to zero (sum = {0})")]
    NotContrast(String),

    #[error("contrast is not estimable under this design")]
    NotEstimable,

    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

pub type Result<T> = std::result::Result<T, Error>;
