use thiserror::Error;

/// Errors raised across the recovery toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("average SNR is undefined when the noise variance is zero")]
    UndefinedSnr,

    /// The Gram matrix of the selected columns is too ill-conditioned to invert.
    #[error("singular projection: Gram matrix of {columns} selected columns has condition estimate {condition:e}")]
    SingularProjection { columns: usize, condition: f64 },

    #[error("enumeration of {count} items exceeds the cap of {cap}")]
    EnumerationTooLarge { count: u128, cap: u128 },

    #[error("config error on line {line} (key `{key}`): {message}")]
    Config {
        line: usize,
        key: String,
        message: String,
    },

    #[error("{0}")]
    Runtime(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
