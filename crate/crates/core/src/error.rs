use thiserror::Error;

/// Errors produced by the linear-algebra kernels, preconditioners and solver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is singular (pivot below threshold)")]
    SingularMatrix,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("residual map returned a non-finite value")]
    NonFiniteEvaluation,

    #[error("difference matrix is rank deficient")]
    RankDeficient,

    #[error("preconditioner is singular: {0}")]
    SingularPreconditioner(String),

    #[error("problem has no linear part, required by this preconditioner")]
    MissingLinearPart,

    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),

    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
