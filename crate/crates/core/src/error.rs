use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("qubit target {target} is out of range for a {n}-qubit register")]
    TargetOutOfRange { target: usize, n: usize },

    #[error("qubit target {0} listed more than once")]
    DuplicateTarget(usize),

    #[error("gate acts on {arity} qubit(s) but {targets} target(s) were given")]
    ArityMismatch { arity: usize, targets: usize },

    #[error("gate is not unitary (max deviation of U†U from I is {0:.3e})")]
    NonUnitary(f64),

    #[error("Kraus branch {index} requested but the set has {len} operators")]
    BranchOutOfRange { index: usize, len: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
