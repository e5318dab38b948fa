use thiserror::Error;

/// Errors surfaced by the exploration laboratory.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value or shape is invalid (dimension mismatches,
    /// out-of-range hyperparameters, malformed files).
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller violated an API contract (stale cache, empty input where
    /// non-empty is required).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Arithmetic produced non-finite values or a solve failed to converge.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// The requested operation is not supported for this configuration
    /// (e.g. oracle rewards on a non-tabular environment).
    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub fn unsupported(msg: impl Into<String>) -> Self {
        Error::Unsupported(msg.into())
    }
}
