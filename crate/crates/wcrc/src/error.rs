//! Crate-wide error type.
//!
//! Each failure mode that the file formats or the numeric contracts can
//! produce gets its own variant so callers (and the CLI) can distinguish
//! them without string matching.

use thiserror::Error;

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A target set was empty; the target mean is undefined.
    #[error("degenerate target: target set is empty")]
    DegenerateTarget,

    /// An index fell outside the population `[0, n)`.
    #[error("index {index} out of range for population of size {n}")]
    IndexOutOfRange { index: usize, n: usize },

    /// Scenario probabilities do not sum to 1.
    #[error("scenario probabilities sum to {sum}, expected 1 (tolerance {tol})")]
    ProbabilitySum { sum: f64, tol: f64 },

    /// A distribution with no scenarios.
    #[error("distribution has no scenarios")]
    EmptyDistribution,

    /// Structural problem in an input file.
    #[error("malformed schema: {0}")]
    MalformedSchema(String),

    /// Vector/matrix dimensions disagree.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// An operation that averages over the sample got an empty sample.
    #[error("empty sample: {0}")]
    EmptySample(String),

    /// A semilinear weight refers to an index with no observed value.
    #[error("missing observed value for supported index {index}")]
    MissingObservation { index: usize },

    /// Invalid configuration for a generator or solver.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// Exact enumeration was requested above the configured threshold.
    #[error("population size {n} exceeds exact threshold {threshold}; use SDP bound")]
    ExactTooLarge { n: usize, threshold: usize },

    /// The solver exhausted its iteration budget before certifying.
    #[error("solver did not converge within {iterations} iterations (residual {residual:.3e})")]
    SolverNonConvergence { residual: f64, iterations: usize },

    /// A matrix expected to be (near-)PSD or symmetric was not.
    #[error("matrix violates {property}: {detail}")]
    MatrixInvariant { property: &'static str, detail: String },

    /// A certified sandwich relation failed beyond tolerance.
    #[error("certification failed: {0}")]
    CertificationFailed(String),

    /// Estimated target covariance is numerically singular.
    #[error("ill-conditioned target covariance: smallest singular value {sigma_min:.3e}")]
    IllConditionedCovariance { sigma_min: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
