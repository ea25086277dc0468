use thiserror::Error;

/// Errors raised across the command-design pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is not symmetric positive definite (pivot {pivot} = {value:e})")]
    Definiteness { pivot: usize, value: f64 },
    #[error("matrix is singular to working precision")]
    Singular,
    #[error("argument outside its domain: {0}")]
    Domain(String),
    #[error("index {index} out of range for length {len}")]
    Index { index: usize, len: usize },
    #[error("quadrature did not reach tolerance {tol:e} (estimated error {estimate:e})")]
    Accuracy { tol: f64, estimate: f64 },
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("plant rejected: {0}")]
    Plant(String),
    #[error("spline basis is degenerate: {0}")]
    BasisDegeneracy(String),
    #[error("unsupported basis: {0}")]
    UnsupportedBasis(String),
    #[error("wrong command convention: {0}")]
    Convention(String),
    #[error("cannot encode payload: {0}")]
    Encoding(String),
    #[error("corrupt payload: {0}")]
    CorruptPayload(String),
    #[error("simulation grid: {0}")]
    Grid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
