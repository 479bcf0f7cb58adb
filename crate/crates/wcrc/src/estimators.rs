//! Semilinear estimators and the standard baselines.
//!
//! A semilinear estimator assigns each scenario a weight vector supported
//! on that scenario's sample set; its estimate is the weighted sum of the
//! observed values. The weights may depend on the scenario and the
//! distribution, never on the values, which is what makes the worst-case
//! error of the estimator a quadratic form in the data.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::scenario::{DataValues, Scenario, ScenarioDistribution, SparseVec};

/// Slack on the certificate-matrix diagonal cap.
const CERTIFICATE_DIAG_TOL: f64 = 1e-9;
/// Slack on the certificate-matrix minimum eigenvalue.
const CERTIFICATE_EIG_TOL: f64 = 1e-8;

// ---------------------------------------------------------------------------
// Observed values
// ---------------------------------------------------------------------------

/// Values observed for a sample set, keyed by population index.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedValues {
    entries: Vec<(usize, f64)>,
}

impl ObservedValues {
    pub fn new(mut entries: Vec<(usize, f64)>) -> Result<Self> {
        entries.sort_by_key(|&(j, _)| j);
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::MalformedSchema(format!(
                    "duplicate observed index {}",
                    w[0].0
                )));
            }
        }
        Ok(Self { entries })
    }

    /// Restrict dense values to the given sample set.
    pub fn from_dense(x: &DataValues, sample: &[usize]) -> Result<Self> {
        let entries = sample
            .iter()
            .map(|&j| {
                x.values()
                    .get(j)
                    .map(|&v| (j, v))
                    .ok_or(Error::IndexOutOfRange { index: j, n: x.len() })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries)
    }

    pub fn get(&self, index: usize) -> Option<f64> {
        self.entries
            .binary_search_by_key(&index, |&(j, _)| j)
            .ok()
            .map(|pos| self.entries[pos].1)
    }

    pub fn indices(&self) -> Vec<usize> {
        self.entries.iter().map(|&(j, _)| j).collect()
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }
}

// ---------------------------------------------------------------------------
// Semilinear estimators
// ---------------------------------------------------------------------------

/// Per-scenario weight vectors, plus an optional certificate matrix `V`
/// that lets the estimator answer queries for scenarios outside the
/// original support.
#[derive(Debug, Clone, PartialEq)]
pub struct SemilinearEstimator {
    n: usize,
    weights: Vec<SparseVec>,
    certificate: Option<DMatrix<f64>>,
}

impl SemilinearEstimator {
    /// Build from per-scenario weights aligned with `dist.scenarios()`.
    /// Every weight vector must be supported on its scenario's sample set.
    pub fn new(dist: &ScenarioDistribution, weights: Vec<SparseVec>) -> Result<Self> {
        if weights.len() != dist.len() {
            return Err(Error::DimensionMismatch { expected: dist.len(), got: weights.len() });
        }
        for (s, w) in dist.scenarios().iter().zip(&weights) {
            if w.dim() != dist.population_size() {
                return Err(Error::DimensionMismatch {
                    expected: dist.population_size(),
                    got: w.dim(),
                });
            }
            for &(j, v) in w.entries() {
                if v != 0.0 && s.sample().binary_search(&j).is_err() {
                    return Err(Error::MalformedSchema(format!(
                        "weight on index {j} outside the scenario sample set"
                    )));
                }
            }
        }
        Ok(Self { n: dist.population_size(), weights, certificate: None })
    }

    /// Attach a certificate matrix (symmetric, diagonal ≤ 1, PSD up to
    /// rounding).
    pub fn with_certificate(mut self, v: DMatrix<f64>) -> Result<Self> {
        if v.nrows() != self.n || v.ncols() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: v.nrows() });
        }
        if linalg::asymmetry(&v) > 1e-9 {
            return Err(Error::MatrixInvariant {
                property: "symmetry",
                detail: format!("certificate asymmetry {}", linalg::asymmetry(&v)),
            });
        }
        if let Some(d) = v.diagonal().iter().find(|&&d| d > 1.0 + CERTIFICATE_DIAG_TOL) {
            return Err(Error::MatrixInvariant {
                property: "diagonal cap",
                detail: format!("certificate diagonal entry {d} exceeds 1"),
            });
        }
        let min_ev = linalg::min_eigenvalue(&v);
        if min_ev < -CERTIFICATE_EIG_TOL {
            return Err(Error::MatrixInvariant {
                property: "positive semidefiniteness",
                detail: format!("certificate minimum eigenvalue {min_ev}"),
            });
        }
        self.certificate = Some(v);
        Ok(self)
    }

    pub fn population_size(&self) -> usize {
        self.n
    }

    pub fn num_scenarios(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[SparseVec] {
        &self.weights
    }

    pub fn scenario_weights(&self, index: usize) -> &SparseVec {
        &self.weights[index]
    }

    pub fn certificate(&self) -> Option<&DMatrix<f64>> {
        self.certificate.as_ref()
    }

    /// Estimate for scenario `scenario_index` from its observed values:
    /// `a_i^T x` over the weight support. Every supported index must be
    /// observed.
    pub fn estimate(&self, scenario_index: usize, observed: &ObservedValues) -> Result<f64> {
        let w = self.weights.get(scenario_index).ok_or(Error::IndexOutOfRange {
            index: scenario_index,
            n: self.weights.len(),
        })?;
        let mut total = 0.0;
        for &(j, v) in w.entries() {
            match observed.get(j) {
                Some(x) => total += v * x,
                None if v == 0.0 => {}
                None => return Err(Error::MissingObservation { index: j }),
            }
        }
        Ok(total)
    }

    // -- JSON interchange ---------------------------------------------------

    pub fn to_json(&self) -> String {
        let doc = EstimatorJson {
            n: self.n,
            weights: self
                .weights
                .iter()
                .enumerate()
                .map(|(i, w)| WeightsJson {
                    scenario: i,
                    entries: w.entries().iter().map(|&(j, v)| (j, v)).collect(),
                })
                .collect(),
            v: self.certificate.as_ref().map(|m| {
                (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
            }),
        };
        serde_json::to_string_pretty(&doc).expect("estimator serializes")
    }

    pub fn from_json(text: &str, dist: &ScenarioDistribution) -> Result<Self> {
        let doc: EstimatorJson =
            serde_json::from_str(text).map_err(|e| Error::MalformedSchema(e.to_string()))?;
        if doc.n != dist.population_size() {
            return Err(Error::DimensionMismatch { expected: dist.population_size(), got: doc.n });
        }
        let mut weights = vec![SparseVec::zeros(doc.n); dist.len()];
        for w in doc.weights {
            if w.scenario >= dist.len() {
                return Err(Error::IndexOutOfRange { index: w.scenario, n: dist.len() });
            }
            weights[w.scenario] = SparseVec::new(doc.n, w.entries)?;
        }
        let est = Self::new(dist, weights)?;
        match doc.v {
            Some(rows) => {
                if rows.len() != doc.n || rows.iter().any(|r| r.len() != doc.n) {
                    return Err(Error::MalformedSchema("certificate matrix is not n x n".into()));
                }
                let flat: Vec<f64> = rows.into_iter().flatten().collect();
                est.with_certificate(DMatrix::from_row_slice(doc.n, doc.n, &flat))
            }
            None => Ok(est),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path, dist: &ScenarioDistribution) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?, dist)
    }
}

#[derive(Serialize, Deserialize)]
struct WeightsJson {
    scenario: usize,
    entries: Vec<(usize, f64)>,
}

#[derive(Serialize, Deserialize)]
struct EstimatorJson {
    n: usize,
    weights: Vec<WeightsJson>,
    #[serde(rename = "V", default, skip_serializing_if = "Option::is_none")]
    v: Option<Vec<Vec<f64>>>,
}

// ---------------------------------------------------------------------------
// Baselines
// ---------------------------------------------------------------------------

/// The standard baseline estimators.
#[derive(Debug, Clone, PartialEq)]
pub enum BaselineKind {
    /// Uniform weights `1/|A|` over the sample.
    SampleMean,
    /// Inverse-propensity weights `1/(n·p_j)`; unbiased for the population
    /// mean under independent inclusion with probabilities `p`.
    HorvitzThompson(Vec<f64>),
    /// Average of per-group sample means over a disjoint partition of the
    /// population; groups the sample misses contribute zero.
    Subgroup(Vec<Vec<usize>>),
    /// Mean of the `w` most recent (largest-index) sample values, where
    /// `w` is the target-set size, truncated to the available history.
    RecentWindow,
}

impl BaselineKind {
    fn validate(&self, n: usize) -> Result<()> {
        match self {
            BaselineKind::SampleMean | BaselineKind::RecentWindow => Ok(()),
            BaselineKind::HorvitzThompson(p) => {
                if p.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, got: p.len() });
                }
                if let Some((j, &bad)) = p.iter().enumerate().find(|&(_, &v)| !(v > 0.0)) {
                    return Err(Error::InvalidConfig(format!(
                        "inclusion probability p_{j} = {bad} must be positive"
                    )));
                }
                Ok(())
            }
            BaselineKind::Subgroup(groups) => {
                let mut seen = vec![false; n];
                for g in groups {
                    for &j in g {
                        if j >= n {
                            return Err(Error::IndexOutOfRange { index: j, n });
                        }
                        if seen[j] {
                            return Err(Error::InvalidConfig(format!(
                                "index {j} appears in two subgroups"
                            )));
                        }
                        seen[j] = true;
                    }
                }
                if seen.iter().any(|&s| !s) {
                    return Err(Error::InvalidConfig(
                        "subgroup partition does not cover the population".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BaselineKind::SampleMean => "sample_mean",
            BaselineKind::HorvitzThompson(_) => "horvitz_thompson",
            BaselineKind::Subgroup(_) => "subgroup",
            BaselineKind::RecentWindow => "recent_window",
        }
    }
}

/// Weight vector of a baseline on one scenario.
pub fn baseline_weights(kind: &BaselineKind, scenario: &Scenario, n: usize) -> Result<SparseVec> {
    kind.validate(n)?;
    let sample = scenario.sample();
    if sample.is_empty() {
        return Err(Error::EmptySample(format!("{} is undefined on empty samples", kind.name())));
    }
    match kind {
        BaselineKind::SampleMean => {
            let w = 1.0 / sample.len() as f64;
            SparseVec::new(n, sample.iter().map(|&j| (j, w)).collect())
        }
        BaselineKind::HorvitzThompson(p) => SparseVec::new(
            n,
            sample.iter().map(|&j| (j, 1.0 / (n as f64 * p[j]))).collect(),
        ),
        BaselineKind::Subgroup(groups) => {
            let share = 1.0 / groups.len() as f64;
            let mut entries = Vec::new();
            for g in groups {
                let hit: Vec<usize> =
                    g.iter().copied().filter(|j| sample.binary_search(j).is_ok()).collect();
                if hit.is_empty() {
                    continue; // empty group keeps its share with an implicit zero mean
                }
                let w = share / hit.len() as f64;
                entries.extend(hit.into_iter().map(|j| (j, w)));
            }
            SparseVec::new(n, entries)
        }
        BaselineKind::RecentWindow => {
            let w = scenario.target_weights().entries().len();
            let take = w.min(sample.len());
            let weight = 1.0 / take as f64;
            SparseVec::new(
                n,
                sample[sample.len() - take..].iter().map(|&j| (j, weight)).collect(),
            )
        }
    }
}

/// A baseline materialized as a semilinear estimator over every scenario
/// of a distribution.
pub fn baseline_estimator(
    kind: &BaselineKind,
    dist: &ScenarioDistribution,
) -> Result<SemilinearEstimator> {
    let weights = dist
        .scenarios()
        .iter()
        .map(|s| baseline_weights(kind, s, dist.population_size()))
        .collect::<Result<Vec<_>>>()?;
    SemilinearEstimator::new(dist, weights)
}

// ---------------------------------------------------------------------------
// Expected squared error for fixed values
// ---------------------------------------------------------------------------

/// Expected squared error of the weights on fixed data:
/// `Σ_i prob_i ((a_i - b_i)^T x)^2`.
pub fn mse_on_values(
    weights: &[SparseVec],
    dist: &ScenarioDistribution,
    x: &DataValues,
) -> Result<f64> {
    if weights.len() != dist.len() {
        return Err(Error::DimensionMismatch { expected: dist.len(), got: weights.len() });
    }
    if x.len() != dist.population_size() {
        return Err(Error::DimensionMismatch { expected: dist.population_size(), got: x.len() });
    }
    let mut total = 0.0;
    for (a, s) in weights.iter().zip(dist.scenarios()) {
        let err = a.dot_dense(x.values())? - s.target_weights().dot_dense(x.values())?;
        total += s.probability() * err * err;
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
