use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("scheme mismatch: {left} vs {right}")]
    SchemeMismatch { left: String, right: String },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("quadrature grid has {nodes} nodes, above the limit of {limit}")]
    QuadratureTooLarge { nodes: usize, limit: usize },

    #[error("polynomial degree {degree} exceeds the supported cap {cap}")]
    DegreeAboveCap { degree: usize, cap: usize },

    #[error("rank-deficient Jacobian at point {index}: condition number {condition:e}")]
    RankDeficient { index: usize, condition: f64 },

    #[error("ill-conditioned chart differential at sample {index}: condition number {condition:e}")]
    IllConditioned { index: usize, condition: f64 },

    #[error("integration blew up at step {step}")]
    BlowUp { step: usize },

    #[error("time grids differ: {0}")]
    GridMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
