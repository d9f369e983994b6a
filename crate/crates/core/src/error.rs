use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
#[non_exhaustive]
pub enum Error {
    /// A caller-supplied value is outside the domain of an operation.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Parameters do not describe a usable mechanism (e.g. an empty annulus).
    #[error("configuration error: {0}")]
    Configuration(String),

    /// An exhaustive computation was asked to go beyond its enumeration bound.
    #[error("capacity exceeded: {what} is {value}, limit is {limit}")]
    Capacity {
        what: &'static str,
        value: usize,
        limit: usize,
    },

    /// Client/server message sequencing was violated.
    #[error("protocol error: {0}")]
    Protocol(String),

    /// A client saw more non-zero partial sums than its sparsity bound allows.
    #[error("sparsity violation: more than {k} non-zero partial sums at order {order}")]
    SparsityViolation { k: usize, order: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Configuration(msg.into())
    }

    pub(crate) fn protocol(msg: impl Into<String>) -> Self {
        Error::Protocol(msg.into())
    }

    /// True for errors caused by bad parameters rather than by I/O or runtime state.
    pub fn is_configuration(&self) -> bool {
        matches!(
            self,
            Error::Configuration(_) | Error::InvalidInput(_) | Error::Capacity { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
