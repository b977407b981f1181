use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("grid step too coarse: {0}")]
    StepTooCoarse(String),
    #[error("invalid grid mask: {0}")]
    InvalidMask(String),
    #[error("eigensolver failed: {0}")]
    SolverFailure(String),
    #[error("requested {m} eigenpairs but the stencil only has {n} unknowns")]
    MTooLarge { m: usize, n: usize },
    #[error("point {index} lies outside the domain")]
    PointOutsideDomain { index: usize },
    #[error("covariance factorization failed even with jitter {jitter:e}; consider a larger noise variance")]
    IllConditioned { jitter: f64 },
    #[error("optimizer failed: {0}")]
    OptimizerFailure(String),
    #[error("truth vector has zero variance")]
    DegenerateTruth,
    #[error("predictive variance at index {index} is not strictly positive")]
    ZeroVariance { index: usize },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("sensor pair index {0} is outside 1..=28")]
    InvalidPair(usize),
    #[error("no model for sensor pair {pair}")]
    MissingModel { pair: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
