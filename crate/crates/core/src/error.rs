use thiserror::Error;

/// Errors produced by the bandit library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid arm index {arm} (number of arms is {num_arms})")]
    InvalidArm { arm: usize, num_arms: usize },
    #[error("invalid context index {context} (number of contexts is {num_contexts})")]
    InvalidContext { context: usize, num_contexts: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid posterior: {0}")]
    InvalidPosterior(String),
    #[error("distribution is not normalized (sum = {0})")]
    NotNormalized(f64),
    #[error("invalid expert pool: {0}")]
    InvalidPool(String),
    #[error("experts file: {0}")]
    ExpertsFile(String),
    #[error("invalid environment: {0}")]
    InvalidEnvironment(String),
}

pub type Result<T> = std::result::Result<T, Error>;
