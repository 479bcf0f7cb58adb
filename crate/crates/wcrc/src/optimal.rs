//! Near-optimal semilinear estimators.
//!
//! [`solve_full`] takes the explicit distribution, maximizes the Schur
//! objective to get the certificate matrix `V̂`, and extracts per-scenario
//! weights `a_i = V̂_{A_iA_i}^{-1} V̂_{A_i} b_i` (pseudoinverse when
//! singular). The solver objective is simultaneously an upper bound on
//! the returned estimator's worst-case expected squared error and at most
//! π/2 times the best achievable by any semilinear estimator.
//!
//! [`estimate_sampled`] is the sampling-access variant: it solves the same
//! objective over a list of sampled scenarios with a strictly positive
//! eigenvalue floor (which keeps the objective Lipschitz), then answers a
//! single query `(A, b, x_A)` with `x_A^T Ṽ_{AA}^{-1} Ṽ_A b`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::audit::{audit, AuditConfig, AuditReport};
use crate::error::{Error, Result};
use crate::estimators::SemilinearEstimator;
use crate::scenario::{make_target_vector, ScenarioDistribution, SparseVec};
use crate::sdp::{extract_weights, solve_schur, SchurProblem, SolverConfig};

// ---------------------------------------------------------------------------
// Full-information solve
// ---------------------------------------------------------------------------

/// A solved estimator together with its certified bound.
#[derive(Debug, Clone)]
pub struct SolvedEstimator {
    pub estimator: SemilinearEstimator,
    /// Solver objective: upper bound on the returned estimator's worst-case
    /// expected squared error, and ≤ π/2 times the best semilinear value.
    pub sdp_bound: f64,
    /// Certified optimality residual of the solve.
    pub residual: f64,
}

/// Run the full-information solve on an explicit distribution.
///
/// Use [`SolverConfig::full_information`] for the default tiny eigenvalue
/// floor (numerical regularization only).
pub fn solve_full(dist: &ScenarioDistribution, cfg: &SolverConfig) -> Result<SolvedEstimator> {
    let problem = SchurProblem::from_distribution(dist);
    let sol = solve_schur(&problem, cfg)?;
    let eval = problem.eval(&sol.v)?;
    let estimator =
        SemilinearEstimator::new(dist, eval.weights)?.with_certificate(sol.v.clone())?;
    Ok(SolvedEstimator { estimator, sdp_bound: sol.objective, residual: sol.residual })
}

/// Re-derive weights for a new scenario list from an estimator's
/// certificate matrix: `a = V_{AA}^{-1} V_A b` per scenario. This is how a
/// solved estimator answers scenarios outside the support it was fit on.
pub fn extend_estimator(
    est: &SemilinearEstimator,
    dist: &ScenarioDistribution,
) -> Result<SemilinearEstimator> {
    let v = est.certificate().ok_or_else(|| {
        Error::InvalidConfig("estimator carries no certificate matrix".into())
    })?;
    if v.nrows() != dist.population_size() {
        return Err(Error::DimensionMismatch {
            expected: dist.population_size(),
            got: v.nrows(),
        });
    }
    let weights = dist
        .scenarios()
        .iter()
        .map(|s| extract_weights(v, s.sample(), s.target_weights()))
        .collect::<Result<Vec<_>>>()?;
    SemilinearEstimator::new(dist, weights)?.with_certificate(v.clone())
}

/// Audit the returned estimator end to end and check its exact worst case
/// (when available) against the solve's own bound.
pub fn worst_case_of_returned(
    solved: &SolvedEstimator,
    dist: &ScenarioDistribution,
    cfg: &AuditConfig,
) -> Result<AuditReport> {
    let report = audit(&solved.estimator, dist, cfg)?;
    if let Some(exact) = report.exact_value {
        let tol = 1e-6 + solved.residual + report.solver_residual;
        if exact > solved.sdp_bound + tol {
            return Err(Error::CertificationFailed(format!(
                "exact worst case {exact} exceeds the solve bound {}",
                solved.sdp_bound
            )));
        }
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Sampling access
// ---------------------------------------------------------------------------

/// Parameters for the sampling-access solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplingRunConfig {
    /// Number of sampled scenarios the solve consumes.
    pub t: usize,
    /// Eigenvalue floor; must be strictly positive here.
    pub eps: f64,
    #[serde(default)]
    pub rng_seed: u64,
}

impl SamplingRunConfig {
    /// Experiment defaults: floor 1e-3 and ten passes over the support.
    pub fn for_distribution(dist: &ScenarioDistribution) -> Self {
        Self { t: 10 * dist.len(), eps: 1e-3, rng_seed: 0 }
    }

    fn validate(&self) -> Result<()> {
        if self.t < 1 {
            return Err(Error::InvalidConfig("need at least one sampled scenario".into()));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "sampling-access eigenvalue floor must lie in (0, 1), got {}",
                self.eps
            )));
        }
        Ok(())
    }
}

/// One query: a sample set with its observed values and a target vector.
#[derive(Debug, Clone)]
pub struct QueryInstance {
    sample: Vec<usize>,
    target: SparseVec,
    observed: Vec<f64>,
}

impl QueryInstance {
    /// `observed` pairs indices with values; it must cover exactly the
    /// sample set and every value must satisfy `|x| ≤ 1`.
    pub fn new(
        n: usize,
        sample: &[usize],
        target: &[usize],
        observed: &[(usize, f64)],
    ) -> Result<Self> {
        let target = make_target_vector(target, n)?;
        let mut sample: Vec<usize> = sample.to_vec();
        sample.sort_unstable();
        sample.dedup();
        if let Some(&j) = sample.iter().find(|&&j| j >= n) {
            return Err(Error::IndexOutOfRange { index: j, n });
        }
        let mut sorted = observed.to_vec();
        sorted.sort_by_key(|&(j, _)| j);
        let covered: Vec<usize> = sorted.iter().map(|&(j, _)| j).collect();
        if covered != sample {
            return Err(Error::MalformedSchema(
                "observed values must cover exactly the sample set".into(),
            ));
        }
        for &(j, v) in &sorted {
            if !(v.abs() <= 1.0 + crate::scenario::VALUE_BOUND_TOL) {
                return Err(Error::InvalidConfig(format!(
                    "observed value x_{j} = {v} exceeds the unit bound"
                )));
            }
        }
        Ok(Self { sample, target, observed: sorted.into_iter().map(|(_, v)| v).collect() })
    }

    pub fn sample(&self) -> &[usize] {
        &self.sample
    }

    pub fn target(&self) -> &SparseVec {
        &self.target
    }

    /// Observed values aligned with `sample()`.
    pub fn observed(&self) -> &[f64] {
        &self.observed
    }

    pub fn from_json(text: &str, n: usize) -> Result<Self> {
        let doc: QueryJson =
            serde_json::from_str(text).map_err(|e| Error::MalformedSchema(e.to_string()))?;
        Self::new(n, &doc.sample, &doc.target, &doc.x_a)
    }
}

/// JSON form of a query:
/// `{"sample": [...], "target": [...], "x_A": [[index, value], ...]}`.
#[derive(Serialize, Deserialize)]
pub struct QueryJson {
    pub sample: Vec<usize>,
    pub target: Vec<usize>,
    #[serde(rename = "x_A")]
    pub x_a: Vec<(usize, f64)>,
}

/// Draw `t` scenarios i.i.d. from the distribution (probabilities as
/// categorical weights), returned as (sample, target-weights) pairs.
pub fn draw_scenarios(
    dist: &ScenarioDistribution,
    t: usize,
    rng_seed: u64,
) -> Vec<(Vec<usize>, SparseVec)> {
    let mut rng = ChaCha12Rng::seed_from_u64(rng_seed);
    let cumulative: Vec<f64> = dist
        .scenarios()
        .iter()
        .scan(0.0, |acc, s| {
            *acc += s.probability();
            Some(*acc)
        })
        .collect();
    (0..t)
        .map(|_| {
            let u: f64 = rng.random();
            let idx = cumulative.partition_point(|&c| c < u).min(dist.len() - 1);
            let s = &dist.scenarios()[idx];
            (s.sample().to_vec(), s.target_weights().clone())
        })
        .collect()
}

/// Solve the sampled Schur objective (uniform weights over the given
/// scenario list, eigenvalue floor `cfg.eps`) and answer one query with
/// `x_A^T Ṽ_{AA}^{-1} Ṽ_A b`.
pub fn estimate_sampled(
    samples: &[(Vec<usize>, SparseVec)],
    query: &QueryInstance,
    cfg: &SamplingRunConfig,
    solver: &SolverConfig,
) -> Result<f64> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::EmptyDistribution);
    }
    let n = samples[0].1.dim();
    let problem = SchurProblem::from_pairs(n, samples)?;
    let solve_cfg = SolverConfig { eig_floor: cfg.eps, rng_seed: cfg.rng_seed, ..solver.clone() };
    let sol = solve_schur(&problem, &solve_cfg)?;
    let weights = extract_weights(&sol.v, query.sample(), query.target())?;
    let mut estimate = 0.0;
    for (&j, &x) in query.sample().iter().zip(query.observed()) {
        estimate += weights.get(j) * x;
    }
    Ok(estimate)
}

/// Convenience composition: sample `cfg.t` scenarios from the distribution
/// and run [`estimate_sampled`] on them.
pub fn estimate_from_distribution(
    dist: &ScenarioDistribution,
    query: &QueryInstance,
    cfg: &SamplingRunConfig,
    solver: &SolverConfig,
) -> Result<f64> {
    cfg.validate()?;
    let samples = draw_scenarios(dist, cfg.t, cfg.rng_seed);
    estimate_sampled(&samples, query, cfg, solver)
}

/// Sampling-access estimate over an explicit weighted scenario list: the
/// sampled objective with the scenarios' own probabilities (a uniform
/// list reduces to [`estimate_sampled`]).
pub fn estimate_on_support(
    dist: &ScenarioDistribution,
    query: &QueryInstance,
    eps: f64,
    solver: &SolverConfig,
) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "sampling-access eigenvalue floor must lie in (0, 1), got {eps}"
        )));
    }
    let problem = SchurProblem::from_distribution(dist);
    let solve_cfg = SolverConfig { eig_floor: eps, ..solver.clone() };
    let sol = solve_schur(&problem, &solve_cfg)?;
    let weights = extract_weights(&sol.v, query.sample(), query.target())?;
    let mut estimate = 0.0;
    for (&j, &x) in query.sample().iter().zip(query.observed()) {
        estimate += weights.get(j) * x;
    }
    Ok(estimate)
}

// ---------------------------------------------------------------------------
