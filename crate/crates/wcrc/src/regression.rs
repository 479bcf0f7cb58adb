//! Linear regression for a target set through the mean machinery.
//!
//! The least-squares coefficients of the target set are
//! `β_B = Q^{-1} u` with `Q = E_{i∼B}[x_i x_i^T]` and
//! `u = E_{i∼B}[x_i y_i]`. Every entry of `Q` and `u` is a target mean of
//! a scalar sequence with entries in [-1, 1], so each is estimated by the
//! semilinear mean estimator, and `β̂ = Q̂^+ û`.
//!
//! The weights depend only on the distribution and the query pair
//! `(A, b)`, never on the scalar sequence, so the `d² + d` estimates reuse
//! one solve of the certificate matrix per distribution. Off-diagonal
//! entries `(j, k)` and `(k, j)` are estimated once and mirrored, which
//! both halves the work and keeps `Q̂` symmetric.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::audit::{build_quadratic_form, exact_worst_case, DEFAULT_EXACT_THRESHOLD};
use crate::error::{Error, Result};
use crate::linalg;
use crate::optimal::{draw_scenarios, solve_full, SamplingRunConfig};
use crate::scenario::{make_target_vector, ScenarioDistribution, SparseVec, VALUE_BOUND_TOL};
use crate::sdp::{extract_weights, solve_schur, SchurProblem, SolverConfig};

// ---------------------------------------------------------------------------
// Data
// ---------------------------------------------------------------------------

/// Feature vectors and labels for the whole population, all entries
/// scaled into [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledData {
    features: Vec<Vec<f64>>,
    labels: Vec<f64>,
}

impl LabeledData {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::DimensionMismatch { expected: features.len(), got: labels.len() });
        }
        if features.is_empty() {
            return Err(Error::InvalidConfig("labeled data is empty".into()));
        }
        let d = features[0].len();
        if d == 0 {
            return Err(Error::InvalidConfig("need at least one feature".into()));
        }
        for (i, row) in features.iter().enumerate() {
            if row.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: row.len() });
            }
            for &f in row {
                if !(f.abs() <= 1.0 + VALUE_BOUND_TOL) {
                    return Err(Error::InvalidConfig(format!(
                        "feature entry {f} at row {i} exceeds the unit bound"
                    )));
                }
            }
        }
        for (i, &y) in labels.iter().enumerate() {
            if !(y.abs() <= 1.0 + VALUE_BOUND_TOL) {
                return Err(Error::InvalidConfig(format!(
                    "label {y} at row {i} exceeds the unit bound"
                )));
            }
        }
        Ok(Self { features, labels })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features[0].len()
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// Parse CSV rows of `d` feature columns followed by one label column;
    /// an optional non-numeric header line is skipped.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let cells: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|c| c.trim().parse::<f64>()).collect();
            match cells {
                Ok(row) if row.len() >= 2 => {
                    let (label, feats) = row.split_last().expect("row has cells");
                    features.push(feats.to_vec());
                    labels.push(*label);
                }
                Ok(_) => {
                    return Err(Error::MalformedSchema(format!(
                        "line {}: need at least one feature column and a label",
                        lineno + 1
                    )))
                }
                Err(_) if lineno == 0 => continue, // header
                Err(e) => {
                    return Err(Error::MalformedSchema(format!("line {}: {e}", lineno + 1)))
                }
            }
        }
        Self::new(features, labels)
    }

    /// Brute-force least-squares coefficients for the target weights:
    /// `(Σ_j b_j x_j x_j^T)^+ (Σ_j b_j x_j y_j)`.
    pub fn target_coefficients(&self, target: &SparseVec) -> Result<Vec<f64>> {
        let (q, u) = true_moments(self, target)?;
        let (beta, _, _) = linalg::svd_solve(&q, &u);
        Ok(beta.iter().copied().collect())
    }
}

/// `Q = Σ_i w_i x_i x_i^T` and `u = Σ_i w_i x_i y_i` where each entry of
/// `entries` pairs a row index with a weight; upper triangle computed once
/// and mirrored.
fn weighted_moments(
    entries: &[(usize, f64)],
    rows: &[Vec<f64>],
    labels: &[f64],
    d: usize,
) -> (DMatrix<f64>, DVector<f64>) {
    let mut q = DMatrix::<f64>::zeros(d, d);
    let mut u = DVector::<f64>::zeros(d);
    for &(i, w) in entries {
        let x = &rows[i];
        let y = labels[i];
        for j in 0..d {
            for k in j..d {
                q[(j, k)] += w * x[j] * x[k];
            }
            u[j] += w * x[j] * y;
        }
    }
    for j in 0..d {
        for k in (j + 1)..d {
            q[(k, j)] = q[(j, k)];
        }
    }
    (q, u)
}

fn true_moments(data: &LabeledData, target: &SparseVec) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if target.dim() != data.len() {
        return Err(Error::DimensionMismatch { expected: data.len(), got: target.dim() });
    }
    Ok(weighted_moments(target.entries(), &data.features, &data.labels, data.dim()))
}

// ---------------------------------------------------------------------------
// Query
// ---------------------------------------------------------------------------

/// One regression query: the sample set with its labeled vectors, and the
/// target weights.
#[derive(Debug, Clone)]
pub struct RegressionInstance {
    n: usize,
    d: usize,
    sample: Vec<usize>,
    target: SparseVec,
    features: Vec<Vec<f64>>,
    labels: Vec<f64>,
}

impl RegressionInstance {
    /// `features` and `labels` are aligned with `sample` in sorted order.
    pub fn new(
        n: usize,
        d: usize,
        sample: &[usize],
        target: &[usize],
        features: Vec<Vec<f64>>,
        labels: Vec<f64>,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidConfig("need at least one feature".into()));
        }
        let target = make_target_vector(target, n)?;
        let mut sorted = sample.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != sample.len() {
            return Err(Error::MalformedSchema("duplicate index in sample set".into()));
        }
        if let Some(&j) = sorted.iter().find(|&&j| j >= n) {
            return Err(Error::IndexOutOfRange { index: j, n });
        }
        if features.len() != sorted.len() || labels.len() != sorted.len() {
            return Err(Error::DimensionMismatch { expected: sorted.len(), got: features.len() });
        }
        for row in &features {
            if row.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: row.len() });
            }
        }
        if !sorted.is_empty() {
            LabeledData::new(features.clone(), labels.clone())?; // bound checks
        }
        Ok(Self { n, d, sample: sorted, target, features, labels })
    }

    /// Restrict full-population data to the sample set.
    pub fn from_data(
        data: &LabeledData,
        n: usize,
        sample: &[usize],
        target: &[usize],
    ) -> Result<Self> {
        if data.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: data.len() });
        }
        let mut sorted = sample.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let features = sorted.iter().map(|&j| data.features()[j].clone()).collect();
        let labels = sorted.iter().map(|&j| data.labels()[j]).collect();
        Self::new(n, data.dim(), &sorted, target, features, labels)
    }

    pub fn sample(&self) -> &[usize] {
        &self.sample
    }

    pub fn target(&self) -> &SparseVec {
        &self.target
    }
}

// ---------------------------------------------------------------------------
// Context: one certificate solve per distribution
// ---------------------------------------------------------------------------

/// How the mean machinery is driven.
#[derive(Debug, Clone)]
pub enum FitMode {
    /// Solve on the explicit distribution.
    FullInformation,
    /// Solve on scenarios sampled from the distribution, with the
    /// sampling-access eigenvalue floor.
    Sampled(SamplingRunConfig),
}

/// The shared solve reused by all `d² + d` scalar estimates (and by any
/// number of fits against the same distribution).
#[derive(Debug, Clone)]
pub struct RegressionContext {
    v_hat: DMatrix<f64>,
    /// Worst-case mean-squared-error guarantee of the scalar mean
    /// estimator: the certified solver bound (conservative choice). In
    /// sampled mode the additive floor allowance `6ε` is included.
    pub alpha_p_sdp: f64,
    /// Exact audited worst case of the scalar estimator, when the
    /// population is small enough to enumerate.
    pub alpha_p_exact: Option<f64>,
}

impl RegressionContext {
    pub fn build(
        dist: &ScenarioDistribution,
        mode: &FitMode,
        solver: &SolverConfig,
    ) -> Result<Self> {
        match mode {
            FitMode::FullInformation => {
                let solved = solve_full(dist, solver)?;
                let alpha_p_exact = if dist.population_size() <= DEFAULT_EXACT_THRESHOLD {
                    let m = build_quadratic_form(solved.estimator.weights(), dist)?;
                    Some(exact_worst_case(m.matrix(), DEFAULT_EXACT_THRESHOLD)?.0)
                } else {
                    None
                };
                let v_hat = solved
                    .estimator
                    .certificate()
                    .expect("full solve stores its certificate")
                    .clone();
                Ok(Self { v_hat, alpha_p_sdp: solved.sdp_bound, alpha_p_exact })
            }
            FitMode::Sampled(run) => {
                let samples = draw_scenarios(dist, run.t, run.rng_seed);
                let problem = SchurProblem::from_pairs(dist.population_size(), &samples)?;
                let cfg = SolverConfig { eig_floor: run.eps, ..solver.clone() };
                let sol = solve_schur(&problem, &cfg)?;
                Ok(Self {
                    v_hat: sol.v,
                    alpha_p_sdp: sol.objective + 6.0 * run.eps,
                    alpha_p_exact: None,
                })
            }
        }
    }

    /// Mean-estimator weights for a query pair `(A, b)`.
    pub fn weights_for(&self, sample: &[usize], target: &SparseVec) -> Result<SparseVec> {
        extract_weights(&self.v_hat, sample, target)
    }
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

/// Result of one regression fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegressionReport {
    pub beta_hat: Vec<f64>,
    /// Estimated (or, with known features, exact) target covariance,
    /// row-major.
    pub q_hat: Vec<Vec<f64>>,
    pub u_hat: Vec<f64>,
    /// Smallest singular value of the true target covariance; present
    /// whenever the target features are known or evaluation data was
    /// supplied.
    pub sigma_d_true: Option<f64>,
    /// `3·sqrt(α_P d³/δ)/σ_d²`, or `sqrt(α_P d/δ)/σ_d` with known
    /// features; needs `sigma_d_true`.
    pub bound_value: Option<f64>,
    pub alpha_p_sdp: f64,
    pub alpha_p_exact: Option<f64>,
    pub delta: f64,
    pub known_features: bool,
    /// Frobenius norm of `Q̂ - Q` (needs evaluation data).
    pub q_error_frobenius: Option<f64>,
    /// Euclidean norm of `û - u` (needs evaluation data).
    pub u_error_norm: Option<f64>,
}

impl RegressionReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

// ---------------------------------------------------------------------------
// Fitting
// ---------------------------------------------------------------------------

fn estimate_moments(
    ctx: &RegressionContext,
    inst: &RegressionInstance,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let weights = ctx.weights_for(&inst.sample, &inst.target)?;
    let aligned: Vec<(usize, f64)> = inst
        .sample
        .iter()
        .enumerate()
        .map(|(row, &j)| (row, weights.get(j)))
        .collect();
    Ok(weighted_moments(&aligned, &inst.features, &inst.labels, inst.d))
}

fn solve_beta(q: &DMatrix<f64>, u: &DVector<f64>) -> Result<(Vec<f64>, f64)> {
    let (beta, sigma_min, sigma_max) = linalg::svd_solve(q, u);
    if sigma_min <= linalg::PINV_CUTOFF * sigma_max.max(1.0) {
        return Err(Error::IllConditionedCovariance { sigma_min });
    }
    Ok((beta.iter().copied().collect(), sigma_min))
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

/// Estimate all of `Q` and `u` with the mean machinery and return
/// `β̂ = Q̂^+ û` plus diagnostics. `eval` supplies held-out full-population
/// data for the error terms and the bound value; it never feeds the fit.
pub fn fit_with_context(
    ctx: &RegressionContext,
    inst: &RegressionInstance,
    delta: f64,
    eval: Option<&LabeledData>,
) -> Result<RegressionReport> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidConfig(format!("delta {delta} outside (0, 1)")));
    }
    let (q_hat, u_hat) = estimate_moments(ctx, inst)?;
    let (beta_hat, _) = solve_beta(&q_hat, &u_hat)?;
    let d = inst.d as f64;

    let mut sigma_d_true = None;
    let mut q_error = None;
    let mut u_error = None;
    if let Some(data) = eval {
        let (q_true, u_true) = true_moments(data, &inst.target)?;
        let svd = q_true.clone().svd(false, false);
        sigma_d_true = Some(svd.singular_values.iter().fold(f64::INFINITY, |a, &s| a.min(s)));
        q_error = Some((&q_hat - &q_true).norm());
        u_error = Some((&u_hat - &u_true).norm());
    }
    let bound_value = sigma_d_true
        .map(|sigma| 3.0 * (ctx.alpha_p_sdp * d.powi(3) / delta).sqrt() / (sigma * sigma));

    Ok(RegressionReport {
        beta_hat,
        q_hat: rows_of(&q_hat),
        u_hat: u_hat.iter().copied().collect(),
        sigma_d_true,
        bound_value,
        alpha_p_sdp: ctx.alpha_p_sdp,
        alpha_p_exact: ctx.alpha_p_exact,
        delta,
        known_features: false,
        q_error_frobenius: q_error,
        u_error_norm: u_error,
    })
}

/// Variant with the target features known exactly: `Q` is computed from
/// `all_features` under the target weights and only `u` is estimated,
/// tightening the bound to `sqrt(α_P d/δ)/σ_d`.
pub fn fit_known_features_with_context(
    ctx: &RegressionContext,
    inst: &RegressionInstance,
    all_features: &[Vec<f64>],
    delta: f64,
    eval: Option<&LabeledData>,
) -> Result<RegressionReport> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidConfig(format!("delta {delta} outside (0, 1)")));
    }
    if all_features.len() != inst.n {
        return Err(Error::DimensionMismatch { expected: inst.n, got: all_features.len() });
    }
    let d = inst.d;
    let mut q = DMatrix::<f64>::zeros(d, d);
    for &(i, w) in inst.target.entries() {
        let x = &all_features[i];
        if x.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: x.len() });
        }
        for j in 0..d {
            for k in 0..d {
                q[(j, k)] += w * x[j] * x[k];
            }
        }
    }
    let (_, u_hat) = estimate_moments(ctx, inst)?;
    let (beta_hat, sigma_min) = solve_beta(&q, &u_hat)?;

    let mut u_error = None;
    if let Some(data) = eval {
        let (_, u_true) = true_moments(data, &inst.target)?;
        u_error = Some((&u_hat - &u_true).norm());
    }
    let bound_value = Some((ctx.alpha_p_sdp * d as f64 / delta).sqrt() / sigma_min);

    Ok(RegressionReport {
        beta_hat,
        q_hat: rows_of(&q),
        u_hat: u_hat.iter().copied().collect(),
        sigma_d_true: Some(sigma_min),
        bound_value,
        alpha_p_sdp: ctx.alpha_p_sdp,
        alpha_p_exact: ctx.alpha_p_exact,
        delta,
        known_features: true,
        q_error_frobenius: Some(0.0),
        u_error_norm: u_error,
    })
}

/// One-shot fit: build the context for this distribution and mode, then
/// run [`fit_with_context`].
pub fn fit(
    dist: &ScenarioDistribution,
    inst: &RegressionInstance,
    mode: &FitMode,
    solver: &SolverConfig,
    delta: f64,
    eval: Option<&LabeledData>,
) -> Result<RegressionReport> {
    let ctx = RegressionContext::build(dist, mode, solver)?;
    fit_with_context(&ctx, inst, delta, eval)
}

/// One-shot fit with known target features.
pub fn fit_known_features(
    dist: &ScenarioDistribution,
    inst: &RegressionInstance,
    all_features: &[Vec<f64>],
    mode: &FitMode,
    solver: &SolverConfig,
    delta: f64,
    eval: Option<&LabeledData>,
) -> Result<RegressionReport> {
    let ctx = RegressionContext::build(dist, mode, solver)?;
    fit_known_features_with_context(&ctx, inst, all_features, delta, eval)
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Scenario;
    use crate::testutil;
    use rand::Rng;

    fn full_coverage_ctx(n: usize) -> RegressionContext {
        let all: Vec<usize> = (0..n).collect();
        let dist = ScenarioDistribution::uniform(n, &[(all.clone(), all)]).unwrap();
        RegressionContext::build(
            &dist,
            &FitMode::FullInformation,
            &SolverConfig::full_information(),
        )
        .unwrap()
    }

    fn random_data(n: usize, d: usize, rng: &mut rand_chacha::ChaCha12Rng) -> LabeledData {
        let features: Vec<Vec<f64>> =
            (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let labels: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        LabeledData::new(features, labels).unwrap()
    }

    #[test]
    fn perfect_coverage_recovers_target_coefficients() {
        let mut rng = testutil::rng(71);
        let n = 8;
        let ctx = full_coverage_ctx(n);
        let data = random_data(n, 2, &mut rng);
        let sample: Vec<usize> = (0..n).collect();
        let target = vec![1, 3, 4, 6];
        let inst = RegressionInstance::from_data(&data, n, &sample, &target).unwrap();
        let report = fit_with_context(&ctx, &inst, 0.2, Some(&data)).unwrap();
        let oracle =
            data.target_coefficients(&make_target_vector(&target, n).unwrap()).unwrap();
        for (a, b) in report.beta_hat.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-9, "beta {a} vs oracle {b}");
        }
        assert!(report.q_error_frobenius.unwrap() < 1e-9);
        assert!(report.u_error_norm.unwrap() < 1e-9);
    }

    #[test]
    fn intercept_only_matches_scalar_mean_estimate() {
        let n = 6;
        // partial coverage, overlapping sample and target so the weights
        // are non-degenerate
        let s0 = Scenario::new(n, &[0, 2, 4], &[2, 3], 0.5).unwrap();
        let s1 = Scenario::new(n, &[1, 3, 5], &[0, 3], 0.5).unwrap();
        let dist = ScenarioDistribution::new(n, vec![s0, s1]).unwrap();
        let ctx = RegressionContext::build(
            &dist,
            &FitMode::FullInformation,
            &SolverConfig::full_information(),
        )
        .unwrap();
        let mut rng = testutil::rng(72);
        let labels: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let features = vec![vec![1.0]; n];
        let data = LabeledData::new(features.clone(), labels.clone()).unwrap();
        let sample = [0usize, 2, 4];
        let target = [2usize, 3];
        let inst = RegressionInstance::from_data(&data, n, &sample, &target).unwrap();

        // with known constant features Q = 1 exactly, so beta equals the
        // scalar semilinear estimate of the label mean
        let report =
            fit_known_features_with_context(&ctx, &inst, &features, 0.2, Some(&data)).unwrap();
        let weights =
            ctx.weights_for(&sample, &make_target_vector(&target, n).unwrap()).unwrap();
        let scalar: f64 = weights.entries().iter().map(|&(j, w)| w * labels[j]).sum();
        assert!((report.beta_hat[0] - scalar).abs() < 1e-12);

        // the unknown-features path self-normalizes by the estimated Q
        let report2 = fit_with_context(&ctx, &inst, 0.2, Some(&data)).unwrap();
        let q00 = report2.q_hat[0][0];
        assert!((report2.beta_hat[0] - report2.u_hat[0] / q00).abs() < 1e-12);
    }

    #[test]
    fn zero_labels_give_zero_coefficients() {
        let mut rng = testutil::rng(73);
        let n = 6;
        let ctx = full_coverage_ctx(n);
        let features: Vec<Vec<f64>> =
            (0..n).map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let data = LabeledData::new(features.clone(), vec![0.0; n]).unwrap();
        let sample: Vec<usize> = (0..n).collect();
        let inst = RegressionInstance::from_data(&data, n, &sample, &[1, 2, 5]).unwrap();
        let report = fit_known_features_with_context(&ctx, &inst, &features, 0.2, None).unwrap();
        assert!(report.beta_hat.iter().all(|&b| b.abs() < 1e-14));
    }

    #[test]
    fn permuting_feature_coordinates_permutes_beta() {
        let mut rng = testutil::rng(74);
        let n = 10;
        let dist = testutil::random_distribution(n, 5, &mut rng);
        // random stress instance: certificates on near-floor-singular
        // blocks plateau just above 1e-6, so ask for 1e-5
        let solver = SolverConfig { rel_tol: 1e-5, ..SolverConfig::full_information() };
        let ctx = RegressionContext::build(&dist, &FitMode::FullInformation, &solver).unwrap();
        let data = random_data(n, 3, &mut rng);
        let swapped = LabeledData::new(
            data.features().iter().map(|r| vec![r[2], r[0], r[1]]).collect(),
            data.labels().to_vec(),
        )
        .unwrap();
        let scenario = &dist.scenarios()[0];
        if scenario.sample().len() < 3 {
            return;
        }
        let inst = RegressionInstance::from_data(
            &data,
            n,
            scenario.sample(),
            &scenario.target_support(),
        )
        .unwrap();
        let inst_swapped = RegressionInstance::from_data(
            &swapped,
            n,
            scenario.sample(),
            &scenario.target_support(),
        )
        .unwrap();
        let r1 = fit_with_context(&ctx, &inst, 0.2, None);
        let r2 = fit_with_context(&ctx, &inst_swapped, 0.2, None);
        if let (Ok(r1), Ok(r2)) = (r1, r2) {
            let b = &r1.beta_hat;
            let expected = [b[2], b[0], b[1]];
            for (a, e) in r2.beta_hat.iter().zip(&expected) {
                assert!((a - e).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn degenerate_covariance_is_an_error() {
        let n = 6;
        let ctx = full_coverage_ctx(n);
        // two identical feature columns: Q singular
        let features: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let v = (i as f64) / (n as f64);
                vec![v, v]
            })
            .collect();
        let data = LabeledData::new(features, vec![0.5; n]).unwrap();
        let sample: Vec<usize> = (0..n).collect();
        let inst = RegressionInstance::from_data(&data, n, &sample, &[0, 1, 2]).unwrap();
        assert!(matches!(
            fit_with_context(&ctx, &inst, 0.2, None),
            Err(Error::IllConditionedCovariance { .. })
        ));
    }

    #[test]
    fn rejects_out_of_bound_entries() {
        assert!(LabeledData::new(vec![vec![1.5]], vec![0.0]).is_err());
        assert!(LabeledData::new(vec![vec![0.5]], vec![-1.2]).is_err());
    }

    #[test]
    fn csv_parse_with_header() {
        let data = LabeledData::parse_csv("f1,f2,y\n0.5,-0.25,1.0\n-1,0,0.5\n").unwrap();
        assert_eq!(data.len(), 2);
        assert_eq!(data.dim(), 2);
        assert_eq!(data.labels(), &[1.0, 0.5]);
        assert!(LabeledData::parse_csv("0.5\n").is_err());
    }

    #[test]
    fn sampled_mode_close_to_full_information_on_small_instance() {
        let mut rng = testutil::rng(75);
        let n = 6;
        let all: Vec<usize> = (0..n).collect();
        let pairs: Vec<(Vec<usize>, Vec<usize>)> = vec![
            (vec![0, 1, 2, 3, 4, 5], all.clone()),
            (vec![0, 2, 4], all.clone()),
            (vec![1, 3, 5], all.clone()),
        ];
        let dist = ScenarioDistribution::uniform(n, &pairs).unwrap();
        let data = random_data(n, 2, &mut rng);
        let inst = RegressionInstance::from_data(&data, n, &[0, 2, 4], &all).unwrap();
        let full = fit(
            &dist,
            &inst,
            &FitMode::FullInformation,
            &SolverConfig::full_information(),
            0.2,
            Some(&data),
        )
        .unwrap();
        let run = SamplingRunConfig { t: 600, eps: 1e-3, rng_seed: 9 };
        let sampled = fit(
            &dist,
            &inst,
            &FitMode::Sampled(run),
            &SolverConfig::default(),
            0.2,
            Some(&data),
        )
        .unwrap();
        for (a, b) in full.beta_hat.iter().zip(&sampled.beta_hat) {
            assert!((a - b).abs() < 0.2, "full {a} vs sampled {b}");
        }
    }
}
