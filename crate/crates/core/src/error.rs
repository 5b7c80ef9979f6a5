use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed graph: {0}")]
    MalformedGraph(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },

    #[error("eigendecomposition failed for mode {mode}: {reason}")]
    Numerical { mode: usize, reason: String },

    #[error("mode {mode} has {size} vertices, above the dense factorization cap of {cap}; use the generalized ADMM instead")]
    TooLarge { mode: usize, size: usize, cap: usize },

    #[error("iterates became non-finite at iteration {iter}")]
    Diverged { iter: usize },

    #[error("COBRA outer iteration {outer}: {source}")]
    Subproblem {
        outer: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(expected: impl ToString, actual: impl ToString) -> Self {
        Error::Shape {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}
