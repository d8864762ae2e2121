use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("argument outside the domain: {0}")]
    Domain(String),

    #[error("level-set gradient is singular at {point:?} (|grad F| = {norm:e})")]
    SingularGradient { point: [f64; 3], norm: f64 },

    #[error("closest-point retraction did not converge from {start:?}")]
    RetractionFailure { start: [f64; 3] },

    #[error("point sampling failed: {0}")]
    Sampling(String),

    #[error("narrow-band lattice failed: {0}")]
    Banding(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("singular mass matrix: zero diagonal entry at index {index}")]
    SingularMass { index: usize },

    #[error("eigenvalue iteration failed: {0}")]
    Eigensolver(String),

    #[error("LAPACK failure: {0}")]
    Lapack(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Lapack(e.to_string())
    }
}
