use thiserror::Error;

#[derive(Debug, Error)]
pub enum FinslerError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid expression: {0}")]
    InvalidExpression(String),

    #[error("point too close to the singular locus: {0}")]
    SingularLocus(String),

    #[error("evaluation near a singularity: {0}")]
    NearSingular(String),

    #[error("derivative order exhausted: {0}")]
    OrderExhausted(String),

    #[error("ill-conditioned Levi matrix (condition number {0:.3e})")]
    IllConditioned(f64),

    #[error("Levi matrix is not Hermitian (residual {0:.3e})")]
    NotHermitian(f64),

    #[error("Levi matrix is not positive definite (smallest eigenvalue {0:.3e})")]
    NotPositive(f64),

    #[error("zero vector: {0}")]
    ZeroVector(String),

    #[error("finite-difference step underflow: {0}")]
    StepUnderflow(String),

    #[error("unknown name: {0}")]
    Unknown(String),

    #[error("acceptance starvation: {accepted} of {attempted} points accepted")]
    Starvation {
        accepted: usize,
        attempted: usize,
        rejections: Vec<(String, usize)>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, FinslerError>;
