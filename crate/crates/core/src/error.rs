use thiserror::Error;

/// Errors raised by sketch construction, estimation and the theory formulas.
#[derive(Debug, Error)]
pub enum Error {
    #[error("hash function index {index} out of range for a family of {m} functions")]
    HashIndexOutOfRange { index: usize, m: usize },

    #[error("incompatible sketches: {0}")]
    IncompatibleSketches(String),

    #[error("sketch is empty; estimation needs at least one element")]
    EmptySketch,

    #[error("unsupported sketch size m = {0}")]
    UnsupportedSize(usize),

    #[error("parameters outside the likelihood domain: {0}")]
    Domain(String),

    #[error("formula is singular at these parameters: {0}")]
    SingularParameters(String),

    #[error("infeasible instance: {0}")]
    InfeasibleInstance(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed sketch file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
