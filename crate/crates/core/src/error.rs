use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the simulator.
///
/// Every variant maps onto a short machine-readable category through
/// [`Error::category`]; the command-line driver prints that category on
/// stderr so scripted sweeps can branch on it.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    Config(String),

    #[error("key `{key}`: {reason}")]
    ConfigKey { key: String, reason: String },

    #[error("grid mismatch: expected {expected}, found {found}")]
    GridMismatch { expected: String, found: String },

    #[error("{0}")]
    Domain(String),

    #[error("maximum principle violated at step {step}, index {index}: |phi| = {value:e}")]
    MaximumPrinciple { step: u64, index: usize, value: f64 },

    #[error("non-finite value at step {step}, index {index}")]
    NonFinite { step: u64, index: usize },

    #[error("initial data is not well prepared: {0}")]
    NotWellPrepared(String),

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn key(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::ConfigKey {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable category string, e.g. `config` or `max-principle`.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Config(_) | Error::ConfigKey { .. } | Error::GridMismatch { .. } => "config",
            Error::Domain(_) => "domain",
            Error::MaximumPrinciple { .. } => "max-principle",
            Error::NonFinite { .. } => "non-finite",
            Error::NotWellPrepared(_) => "validation",
            Error::Parse { .. } => "parse",
            Error::Io { .. } => "io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
