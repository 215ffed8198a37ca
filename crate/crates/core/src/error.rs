use thiserror::Error;

/// Errors raised by the library and mapped onto CLI exit codes.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke an operation's preconditions (shape, finiteness, range).
    #[error("contract violation: {0}")]
    Contract(String),

    /// An environment, experiment or kernel configuration is invalid.
    #[error("configuration error: {0}")]
    Config(String),

    /// The operation is well-formed but not supported for this input.
    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// A linear solve failed even after jitter escalation.
    #[error("numerical failure: {message} (n = {size}, last jitter = {jitter:e})")]
    Numerical {
        message: String,
        size: usize,
        jitter: f64,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

macro_rules! contract {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err($crate::error::Error::Contract(format!($($arg)+)));
        }
    };
}

pub(crate) use contract;
