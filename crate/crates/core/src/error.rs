use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// An operation was asked to act on a state where it is undefined,
    /// e.g. a jump from a state with no excited component.
    #[error("logic error: {0}")]
    Logic(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("estimation failure: {0}")]
    Estimation(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
