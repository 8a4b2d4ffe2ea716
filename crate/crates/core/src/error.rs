use alloc::string::String;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Caller-supplied data violates a documented precondition.
    #[error("invalid input: {0}")]
    Validation(String),
    /// A map or function was evaluated outside its domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// A numerical routine failed to reach its tolerance or produced non-finite values.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// The requested work exceeds a hard resource cap.
    #[error("resource limit: {0}")]
    ResourceLimit(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

macro_rules! invalid {
    ($($arg:tt)*) => {
        $crate::error::Error::Validation(alloc::format!($($arg)*))
    };
}
pub(crate) use invalid;
