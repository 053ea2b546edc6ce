use thiserror::Error;

/// Errors produced by the simulation and moment machinery.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite entries in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not diagonalizable (eigenvector condition number {cond:.3e})")]
    NonDiagonalizable { cond: f64 },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eig:.3e}, tolerance {tol:.3e})")]
    NotPsd { min_eig: f64, tol: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("spectral condition violated: {0}")]
    Unstable(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
