use thiserror::Error;

/// Errors raised by the inference routines and the simulation machinery.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The covariance handed to the inverse has a pivot below the relative floor.
    #[error("matrix is not positive definite (pivot {pivot:e} below floor {floor:e})")]
    NotPositiveDefinite { pivot: f64, floor: f64 },

    #[error("probability {0} outside (0, 1)")]
    ProbabilityDomain(f64),

    #[error("subsample size {b} exceeds population size {n}")]
    SubsampleTooLarge { b: usize, n: usize },

    #[error("level unattainable: L(1 - alpha) = {0} < 1")]
    LevelUnattainable(f64),

    #[error("moment function returned a non-finite value at row {row}")]
    NonFiniteMoment { row: usize },

    /// Making the target correlation matrix positive semidefinite moved it too far.
    #[error("covariance repair changed the target by {perturbation:.3e} in relative Frobenius norm")]
    CovarianceRepair { perturbation: f64 },
}

impl Error {
    /// True for errors that signal a degenerate covariance rather than bad input.
    pub fn is_degenerate(&self) -> bool {
        matches!(self, Error::NotPositiveDefinite { .. } | Error::CovarianceRepair { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
