//! Worst-case analysis for randomly collected data.
//!
//! Given a joint distribution over (sample, target) index-set pairs, this
//! crate computes near-optimal semilinear mean estimators, certifies the
//! worst-case expected squared error of arbitrary semilinear estimators via
//! a semidefinite relaxation with randomized-rounding lower bounds, and
//! extends the mean machinery to linear regression.
//!
//! The pieces fit together as follows:
//!
//! * [`scenario`] — populations, sample/target scenarios, distributions,
//!   and data-value vectors, plus their JSON interchange formats.
//! * [`samplers`] — generators for importance sampling, snowball sampling
//!   over a geometric population, and chronological selective prediction.
//! * [`estimators`] — semilinear estimators and the standard baselines
//!   (sample mean, inverse-propensity weighting, subgroup means, recency
//!   windows).
//! * [`sdp`] — the shared concave-maximization backend: the linear
//!   spectahedron problem and the Schur-complement objective.
//! * [`audit`] — worst-case certification of a fixed estimator: exact
//!   brute force for small populations, SDP upper bound, and hyperplane
//!   rounding lower-bound certificates.
//! * [`optimal`] — the full-information solver extracting π/2-approximate
//!   optimal weights, and the sampling-access variant answering single
//!   queries.
//! * [`regression`] — least-squares coefficients for a target set,
//!   estimated entrywise through the mean machinery.
//! * [`harness`] — reproducible experiment driver with CSV/JSON reporting.
//!
//! All indices are 0-based throughout, including every file format.

pub mod audit;
pub mod error;
pub mod estimators;
pub mod harness;
pub(crate) mod linalg;
pub mod optimal;
pub mod regression;
pub mod samplers;
pub mod scenario;
pub mod sdp;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
