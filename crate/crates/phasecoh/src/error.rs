//! Crate-wide error type.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    #[error("label collision: `{0}` appears on both operands")]
    LabelCollision(String),

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("matrix is not Hermitian (max |M - M^dagger| = {0:.3e})")]
    NotHermitian(f64),

    #[error("invalid system specification: {0}")]
    BadSystems(String),

    #[error("invalid state: {0}")]
    BadState(String),

    #[error("invalid cost function: {0}")]
    BadCost(String),

    #[error("invalid channel: {0}")]
    BadChannel(String),

    #[error("invalid measurement: {0}")]
    BadMeasurement(String),

    #[error("invalid argument: {0}")]
    BadArgument(String),

    #[error("problem size exceeds the supported cap: {0}")]
    SizeCap(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
