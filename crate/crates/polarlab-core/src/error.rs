use alloc::string::String;

/// Errors raised by the core algorithms.
///
/// `Guard` is the "this would not fit" family: enumeration sizes and similar
/// limits that are checked up front instead of silently degrading.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("{what} needs {needed} but the limit is {limit}")]
    Guard {
        what: &'static str,
        needed: u128,
        limit: u128,
    },
    #[error("did not converge: {0}")]
    NoConvergence(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Invalid(msg.into())
}
