use thiserror::Error;

/// Errors raised by model construction, assembly and the linear-algebra engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("point ({x}, {y}) lies outside the domain [0, {a}) x [0, {b})")]
    OutsideDomain { x: f64, y: f64, a: f64, b: f64 },

    #[error("invalid coefficient specification: {0}")]
    InvalidSpec(String),

    #[error("parameter layout mismatch: expected {expected} values, got {got}")]
    LayoutMismatch { expected: usize, got: usize },

    #[error("infeasible parameter vector: {0}")]
    Infeasible(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("invalid observation model: {0}")]
    InvalidObservation(String),

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("malformed input: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
