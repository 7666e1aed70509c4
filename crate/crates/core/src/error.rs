use thiserror::Error;

/// Errors produced by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    /// A structural parameter is out of range or inconsistent (bad μ, length
    /// mismatch, non-increasing grid, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An input value is outside the domain of an operation (non-finite
    /// price, action index out of range, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical procedure failed to converge or produced a non-finite
    /// value.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The requested configuration is valid in general but not supported by
    /// this operation (e.g. asymmetric parameters in the equilibrium solver).
    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// An experiment description is inconsistent (bad agent ids, overlapping
    /// interventions, missing snapshot, ...).
    #[error("config error: {0}")]
    Config(String),

    /// A snapshot file could not be read or does not match the expected
    /// format.
    #[error("snapshot error: {0}")]
    Snapshot(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
