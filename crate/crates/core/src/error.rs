use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("finite-difference product requested along the zero vector")]
    ZeroDirection,

    #[error("constraint Jacobian is rank deficient (pivot {pivot:.3e} at column {column}, threshold {threshold:.3e})")]
    RankDeficient {
        column: usize,
        pivot: f64,
        threshold: f64,
    },

    #[error("appended column is dependent on the current span (residual {residual:.3e})")]
    DependentColumn { residual: f64 },

    #[error("zero pivot in leading minor {minor}")]
    SingularMinor { minor: usize },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("points {0} and {1} coincide")]
    CoincidentPoints(usize, usize),

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    MaxIterations { iterations: usize, residual: f64 },

    #[error("near-dependent constraint row cannot be normalized (it is zero)")]
    CannotNormalize,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
