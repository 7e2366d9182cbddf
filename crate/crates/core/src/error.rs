use thiserror::Error;

/// Errors reported by code construction, decoding and simulation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument is malformed or out of range.
    #[error("invalid argument: {0}")]
    Argument(String),
    /// A request would allocate more than the library is willing to.
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    /// The combination of inputs is inconsistent (e.g. a frozen set that is
    /// not invariant under the requested permutations).
    #[error("configuration error: {0}")]
    Configuration(String),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Configuration(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
