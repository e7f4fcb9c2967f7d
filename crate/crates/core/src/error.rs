use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Structural problem in a model description.
    #[error("format error in term {term:?}: {message}")]
    Format {
        term: Option<usize>,
        message: String,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("term is not positive semidefinite: eigenvalue {eigenvalue:e} below -{tol:e}")]
    NotPsd { eigenvalue: f64, tol: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("no convergence after {iterations} iterations (last {last:e}, previous {previous:e})")]
    NonConvergence {
        iterations: usize,
        last: f64,
        previous: f64,
    },

    #[error("dimension {dim} exceeds dense threshold {threshold}")]
    DenseRefused { dim: usize, threshold: usize },

    #[error("operator failed the Hermitian contract (deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("not frustration-free: ground energy {ground_energy:e} > tol {zero_tol:e}")]
    NotFrustrationFree { ground_energy: f64, zero_tol: f64 },

    #[error("ground vector {vector} has residual {residual:e} on term {term}")]
    Inconsistent {
        vector: usize,
        term: usize,
        residual: f64,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("insufficient data: {usable} usable points, need at least {required}")]
    InsufficientData { usable: usize, required: usize },

    #[error("series does not decay (slope {slope:e})")]
    NoDecay { slope: f64 },

    #[error("interaction range r = 1: the causal-cone identity holds for every m")]
    DegenerateRange,

    #[error("schedule does not match spec: {0}")]
    ScheduleMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
