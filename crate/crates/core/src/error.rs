use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unknown mode label {0}")]
    UnknownLabel(String),
    #[error("unknown path {0}")]
    UnknownPath(String),
    #[error("path {0} declared twice")]
    DuplicatePath(String),
    #[error("empty term list")]
    EmptyTerms,
    #[error("matrix is not unitary (max deviation {0:.3e})")]
    NotUnitary(f64),
    #[error("malformed mode unitary: {0}")]
    BadUnitary(String),
    #[error("mode index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("states live on different registers")]
    RegisterMismatch,
    #[error("zero state cannot be normalized")]
    ZeroState,
    #[error("reflection coefficient {0} outside [0, 1]")]
    ReflectionOutOfRange(f64),
    #[error("non-finite angle {0}")]
    BadAngle(f64),
    #[error("detector efficiency {0} outside [0, 1]")]
    BadEfficiency(f64),
    #[error("detector {0} declared twice")]
    DuplicateDetector(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("state shape: {0}")]
    Shape(String),
    #[error("branch was not accepted")]
    RejectedBranch,
}

pub type Result<T> = std::result::Result<T, Error>;
