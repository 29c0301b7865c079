use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("network is disconnected; buses unreachable from the reference bus: {0:?}")]
    Disconnected(Vec<u32>),

    #[error("singular matrix encountered in {0}")]
    Singular(&'static str),

    #[error("no solution: {0}")]
    NoSolution(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("commitment schedule violates unit logic: {0}")]
    LogicViolation(String),

    #[error("infeasible: {0}")]
    Infeasible(String),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            expected,
            got,
        })
    }
}
