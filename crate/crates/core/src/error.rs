use thiserror::Error;

/// Failure modes shared by every stage of the pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("sizing error: {0}")]
    Sizing(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("unsupported derivative order {0} (maximum is 5)")]
    UnsupportedOrder(usize),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("solver error at step {step}: {detail}")]
    Solver { step: usize, detail: String },
    #[error("assumption violated: {0}")]
    Assumption(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("ill-conditioned normal equations (condition estimate {condition:.3e})")]
    IllConditioned { condition: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
