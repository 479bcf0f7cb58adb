//! Worst-case expected-error certification for a fixed semilinear
//! estimator.
//!
//! The worst-case expected squared error of weights `a_i` against targets
//! `b_i` equals `max_{x ∈ {-1,1}^n} x^T M x` for the PSD matrix
//! `M = Σ_i prob_i (a_i - b_i)(a_i - b_i)^T` — the positive semidefinite
//! Grothendieck problem. Three routes to that value live here:
//!
//! * [`exact_worst_case`] — brute force over sign vectors (small `n`),
//! * [`sdp_upper_bound`] — the semidefinite relaxation, never below the
//!   exact value and at most π/2 times it,
//! * [`round_certificate`] — Goemans–Williamson hyperplane rounding of the
//!   relaxation's Gram vectors, whose closed-form expectation is a lower
//!   bound recovering at least 2/π of the relaxation value.
//!
//! [`audit`] assembles all three into an [`AuditReport`] and enforces the
//! sandwich relations between them.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::SemilinearEstimator;
use crate::linalg;
use crate::scenario::{ScenarioDistribution, SparseVec};
use crate::sdp::{solve_linear, SolverConfig, SpectralSolution};

/// Default population-size cap for the brute-force oracle: 2^21 sign
/// patterns after symmetry, under ~10 s.
pub const DEFAULT_EXACT_THRESHOLD: usize = 22;

// ---------------------------------------------------------------------------
// Quadratic form
// ---------------------------------------------------------------------------

/// The PSD matrix `M = Σ_i prob_i (a_i - b_i)(a_i - b_i)^T` whose
/// Grothendieck value is the estimator's worst-case expected error.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticFormMatrix {
    m: DMatrix<f64>,
}

impl QuadraticFormMatrix {
    /// Wrap a matrix, checking symmetry (1e-10) and PSD-ness (minimum
    /// eigenvalue ≥ -1e-8).
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let asym = linalg::asymmetry(&m);
        if asym > 1e-10 * m.amax().max(1.0) {
            return Err(Error::MatrixInvariant {
                property: "symmetry",
                detail: format!("asymmetry {asym}"),
            });
        }
        let min_ev = linalg::min_eigenvalue(&m);
        if min_ev < -1e-8 {
            return Err(Error::MatrixInvariant {
                property: "positive semidefiniteness",
                detail: format!("minimum eigenvalue {min_ev}"),
            });
        }
        Ok(Self { m })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    /// `x^T M x`.
    pub fn quadratic_form(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        let xv = DVector::from_column_slice(x);
        Ok((xv.transpose() * &self.m * xv)[(0, 0)])
    }
}

/// Assemble `M = Σ_i prob_i (a_i - b_i)(a_i - b_i)^T` for per-scenario
/// weights aligned with the distribution.
pub fn build_quadratic_form(
    weights: &[SparseVec],
    dist: &ScenarioDistribution,
) -> Result<QuadraticFormMatrix> {
    let n = dist.population_size();
    if weights.len() != dist.len() {
        return Err(Error::DimensionMismatch { expected: dist.len(), got: weights.len() });
    }
    let mut m = DMatrix::<f64>::zeros(n, n);
    let mut diff = DVector::<f64>::zeros(n);
    for (a, s) in weights.iter().zip(dist.scenarios()) {
        if a.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, got: a.dim() });
        }
        diff.fill(0.0);
        for &(j, w) in a.entries() {
            diff[j] += w;
        }
        for &(j, w) in s.target_weights().entries() {
            diff[j] -= w;
        }
        m.ger(s.probability(), &diff, &diff, 1.0);
    }
    QuadraticFormMatrix::new(linalg::symmetrize(&m))
}

// ---------------------------------------------------------------------------
// Exact oracle
// ---------------------------------------------------------------------------

/// `max_{x ∈ {-1,1}^n} x^T M x` with a maximizing witness, by Gray-code
/// enumeration of the 2^(n-1) sign patterns with `x_0 = +1` (the form is
/// invariant under `x ↔ -x`). Errors above `threshold`.
pub fn exact_worst_case(m: &DMatrix<f64>, threshold: usize) -> Result<(f64, Vec<f64>)> {
    let n = m.nrows();
    if n == 0 || m.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n.max(1), got: m.ncols() });
    }
    if n > threshold {
        return Err(Error::ExactTooLarge { n, threshold });
    }

    let mut x = vec![1.0_f64; n];
    let mut s: Vec<f64> = (0..n).map(|j| m.row(j).sum()).collect();
    let mut val: f64 = x.iter().zip(&s).map(|(xj, sj)| xj * sj).sum();

    let mut best_val = val;
    let mut best_x = x.clone();

    let patterns: u64 = 1u64 << (n - 1);
    for c in 1..patterns {
        // Gray code: flip the free coordinate indexed by trailing zeros
        let j = c.trailing_zeros() as usize + 1;
        val += -4.0 * x[j] * s[j] + 4.0 * m[(j, j)];
        let twice = 2.0 * x[j];
        for i in 0..n {
            s[i] -= twice * m[(i, j)];
        }
        x[j] = -x[j];
        if val > best_val {
            best_val = val;
            best_x.copy_from_slice(&x);
        }
    }

    // recompute the winner exactly to shed incremental rounding drift
    let xv = DVector::from_column_slice(&best_x);
    let exact = (xv.transpose() * m * xv)[(0, 0)];
    Ok((exact, best_x))
}

// ---------------------------------------------------------------------------
// SDP upper bound
// ---------------------------------------------------------------------------

/// The semidefinite relaxation `max {⟨M, V⟩ : V ⪰ 0, diag(V) ≤ 1}` of the
/// sign-vector maximum, solved and certified by [`solve_linear`].
pub fn sdp_upper_bound(
    m: &QuadraticFormMatrix,
    cfg: &SolverConfig,
) -> Result<SpectralSolution> {
    solve_linear(m.matrix(), cfg)
}

// ---------------------------------------------------------------------------
// Hyperplane rounding
// ---------------------------------------------------------------------------

/// Outcome of hyperplane rounding: the best sign vector found, the exact
/// closed-form expectation of a single rounding, and Monte-Carlo summary
/// statistics over the performed rounds.
#[derive(Debug, Clone)]
pub struct RoundCertificate {
    pub best_x: Vec<f64>,
    pub best_value: f64,
    /// `Σ_jk M_jk (1 - (2/π)·arccos(Ṽ_jk))` with `Ṽ` the unit-diagonal
    /// rescaling of `V`.
    pub expectation: f64,
    pub sample_mean: f64,
    pub sample_std_err: f64,
    pub rounds: usize,
}

/// Round the Gram vectors of `V` through random hyperplanes: draw a
/// direction `r`, output `x_j = sign(r^T v_j)`. Columns are normalized to
/// unit length first; zero columns round to an independent fair coin.
pub fn round_certificate(
    v: &DMatrix<f64>,
    m: &QuadraticFormMatrix,
    rng_seed: u64,
    num_rounds: usize,
) -> Result<RoundCertificate> {
    let n = m.dim();
    if v.nrows() != n || v.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: v.nrows() });
    }
    if num_rounds == 0 {
        return Err(Error::InvalidConfig("num_rounds must be positive".into()));
    }
    if let Some(d) = v.diagonal().iter().find(|&&d| d > 1.0 + 1e-8) {
        return Err(Error::MatrixInvariant {
            property: "diagonal cap",
            detail: format!("V diagonal entry {d} exceeds 1"),
        });
    }
    let w = linalg::gram_columns(v, 1e-6).map_err(|min_ev| Error::MatrixInvariant {
        property: "positive semidefiniteness",
        detail: format!("V minimum eigenvalue {min_ev}"),
    })?;

    // unit-normalized columns; zero columns become independent coins
    let mut cols: Vec<Option<DVector<f64>>> = Vec::with_capacity(n);
    for j in 0..n {
        let col = w.column(j).clone_owned();
        let norm = col.norm();
        cols.push(if norm > 1e-9 { Some(col / norm) } else { None });
    }

    // closed-form expectation with arccos arguments clamped to [-1, 1]
    let mm = m.matrix();
    let mut expectation = 0.0;
    for j in 0..n {
        for k in 0..n {
            let rho = if j == k {
                1.0
            } else {
                match (&cols[j], &cols[k]) {
                    (Some(a), Some(b)) => {
                        let dot = a.dot(b).clamp(-1.0, 1.0);
                        1.0 - std::f64::consts::FRAC_2_PI * dot.acos()
                    }
                    _ => 0.0,
                }
            };
            expectation += mm[(j, k)] * rho;
        }
    }

    let mut rng = ChaCha12Rng::seed_from_u64(rng_seed);
    let mut best_value = f64::NEG_INFINITY;
    let mut best_x = vec![1.0; n];
    let mut mean = 0.0;
    let mut m2 = 0.0;
    let mut x = vec![0.0_f64; n];
    for round in 0..num_rounds {
        let r = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        for j in 0..n {
            let dot = cols[j].as_ref().map_or(0.0, |c| c.dot(&r));
            x[j] = if dot > 0.0 {
                1.0
            } else if dot < 0.0 {
                -1.0
            } else if rng.random::<bool>() {
                1.0
            } else {
                -1.0
            };
        }
        let value = m.quadratic_form(&x)?;
        if value > best_value {
            best_value = value;
            best_x.copy_from_slice(&x);
        }
        let delta = value - mean;
        mean += delta / (round + 1) as f64;
        m2 += delta * (value - mean);
    }
    let variance = if num_rounds > 1 { m2 / (num_rounds - 1) as f64 } else { 0.0 };
    Ok(RoundCertificate {
        best_x,
        best_value,
        expectation,
        sample_mean: mean,
        sample_std_err: (variance / num_rounds as f64).sqrt(),
        rounds: num_rounds,
    })
}

// ---------------------------------------------------------------------------
// Full audit
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditConfig {
    /// Run the exact oracle when `n` is at most this.
    pub exact_threshold: usize,
    /// Hyperplane roundings per audit.
    pub num_rounds: usize,
    pub rng_seed: u64,
    pub solver: SolverConfig,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            exact_threshold: DEFAULT_EXACT_THRESHOLD,
            num_rounds: 400,
            rng_seed: 0,
            solver: SolverConfig::default(),
        }
    }
}

/// Certified worst-case summary of one estimator on one distribution.
///
/// Invariants (all with tolerance `1e-6` plus the solver residual):
/// `rounding_lower ∈ [(2/π)·sdp_upper, sdp_upper]`, and when the exact
/// value is present `exact_value ≤ sdp_upper ≤ (π/2)·exact_value`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditReport {
    pub sdp_upper: f64,
    pub rounding_lower: f64,
    pub exact_value: Option<f64>,
    pub witness_x: Option<Vec<f64>>,
    pub solver_residual: f64,
}

impl AuditReport {
    /// Tolerance used by every sandwich assertion on this report.
    pub fn tolerance(&self) -> f64 {
        1e-6 + self.solver_residual
    }

    fn validate(&self) -> Result<()> {
        let tol = self.tolerance();
        let half_pi = std::f64::consts::FRAC_PI_2;
        if self.rounding_lower > self.sdp_upper + tol {
            return Err(Error::CertificationFailed(format!(
                "rounding expectation {} exceeds SDP bound {}",
                self.rounding_lower, self.sdp_upper
            )));
        }
        if self.rounding_lower < std::f64::consts::FRAC_2_PI * self.sdp_upper - tol {
            return Err(Error::CertificationFailed(format!(
                "rounding expectation {} below (2/pi) x SDP bound {}",
                self.rounding_lower, self.sdp_upper
            )));
        }
        if let Some(exact) = self.exact_value {
            if exact > self.sdp_upper + tol {
                return Err(Error::CertificationFailed(format!(
                    "exact value {exact} exceeds SDP bound {}",
                    self.sdp_upper
                )));
            }
            if self.sdp_upper > half_pi * exact + tol {
                return Err(Error::CertificationFailed(format!(
                    "SDP bound {} exceeds (pi/2) x exact value {exact}",
                    self.sdp_upper
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Assemble the full certification: quadratic form, SDP upper bound,
/// rounding lower bound, and (for small populations) the exact value with
/// a witness. Every report returned has passed its sandwich checks.
pub fn audit(
    est: &SemilinearEstimator,
    dist: &ScenarioDistribution,
    cfg: &AuditConfig,
) -> Result<AuditReport> {
    let m = build_quadratic_form(est.weights(), dist)?;
    let sol = sdp_upper_bound(&m, &cfg.solver)?;
    let rounding = round_certificate(&sol.v, &m, cfg.rng_seed, cfg.num_rounds)?;
    let exact = if dist.population_size() <= cfg.exact_threshold {
        Some(exact_worst_case(m.matrix(), cfg.exact_threshold)?)
    } else {
        None
    };
    if let Some((value, witness)) = &exact {
        // the best rounded point is itself a feasible sign vector
        if rounding.best_value > value + 1e-9 * value.abs().max(1.0) {
            return Err(Error::CertificationFailed(format!(
                "rounded value {} exceeds exact maximum {value}",
                rounding.best_value
            )));
        }
        let _ = witness;
    }
    let report = AuditReport {
        sdp_upper: sol.objective,
        rounding_lower: rounding.expectation,
        exact_value: exact.as_ref().map(|(v, _)| *v),
        witness_x: exact.map(|(_, w)| w),
        solver_residual: sol.residual,
    };
    report.validate()?;
    Ok(report)
}

// ---------------------------------------------------------------------------
