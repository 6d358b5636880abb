use thiserror::Error;

use crate::vector::Index;

/// Errors reported by the convolution engines and their supporting modules.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// A size guard refused to allocate or enumerate.
    #[error("guard refused {what}: requires {required}, limit {limit}")]
    Guard {
        what: &'static str,
        required: u128,
        limit: u128,
    },

    /// An index was outside the declared length of its vector.
    #[error("index {index} out of range for length {length}")]
    IndexOutOfRange { index: Index, length: Index },

    /// A declared length exceeds what the engines can address.
    #[error("length {0} exceeds the supported maximum")]
    LengthTooLarge(u128),

    /// An engine that only accepts nonnegative input saw a negative entry.
    #[error("negative entry at index {0}")]
    NegativeEntry(Index),

    /// A field operation outside its domain, e.g. inverting zero.
    #[error("domain error: {0}")]
    Domain(String),

    /// The caller broke a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// An internal consistency check failed.
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn guard(what: &'static str, required: impl Into<u128>, limit: impl Into<u128>) -> Self {
        Error::Guard {
            what,
            required: required.into(),
            limit: limit.into(),
        }
    }
}
