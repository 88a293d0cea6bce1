use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid nonlinearity: {0}")]
    InvalidNonlinearity(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("field has zero mass")]
    ZeroField,

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("no positive window: rho = {rho} is not below rho0 = {rho0}")]
    NoPositiveWindow { rho: f64, rho0: f64 },

    #[error("threshold is unbounded: {0}")]
    Unconstrained(String),

    #[error("kernel symbol is not positive: min = {min:e} at mode {index}")]
    KernelNotPositive { min: f64, index: usize },

    #[error("malformed field file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
