use thiserror::Error;

/// Errors raised by the physics and estimation layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter is outside its domain (negative intensity, DOP above one, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The optical configuration cannot produce the requested quantity, e.g. a
    /// stripping polarizer that extinguishes the auxiliary arm.
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub(crate) fn degenerate(msg: impl Into<String>) -> Error {
    Error::Degenerate(msg.into())
}
