//! Core data model: populations, sample/target scenarios, distributions
//! over scenarios, and data-value vectors.
//!
//! A [`Scenario`] is one (sample set `A`, target weight vector `b`,
//! probability) triple. The target weights are always uniform over the
//! target support, i.e. `b_j = 1/|B|` for `j ∈ B`, so `b^T x` is the
//! target mean. A [`ScenarioDistribution`] is a finite weighted list of
//! scenarios over a population `{0, …, n-1}`.
//!
//! All types are immutable after construction and safe to share across
//! threads.
//!
//! # Interchange format
//!
//! Distributions serialize as
//!
//! ```json
//! {"n": 4, "scenarios": [{"sample": [0,2], "target": [1,3], "prob": 0.3}, …]}
//! ```
//!
//! Indices are 0-based. `prob` may be omitted; scenarios without an
//! explicit `prob` share the leftover probability mass uniformly (so a
//! file with no `prob` fields at all is the uniform distribution).
//! Data-value vectors are a JSON array of `n` floats or a CSV column.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for "probabilities sum to 1" on distributions.
pub const PROB_SUM_TOL: f64 = 1e-9;

/// Tolerance for "target weights sum to 1" on a single scenario.
pub const TARGET_SUM_TOL: f64 = 1e-12;

/// Slack allowed on `|x_j| ≤ 1` for worst-case-normalized values.
pub const VALUE_BOUND_TOL: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Sparse vectors
// ---------------------------------------------------------------------------

/// A sparse real vector of fixed dimension, entries sorted by index.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVec {
    n: usize,
    entries: Vec<(usize, f64)>,
}

impl SparseVec {
    /// Build from (index, value) pairs; indices must be distinct and in
    /// `[0, n)`. Zero values are kept as given.
    pub fn new(n: usize, mut entries: Vec<(usize, f64)>) -> Result<Self> {
        entries.sort_by_key(|&(j, _)| j);
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::MalformedSchema(format!(
                    "duplicate index {} in sparse vector",
                    w[0].0
                )));
            }
        }
        if let Some(&(j, _)) = entries.iter().find(|&&(j, _)| j >= n) {
            return Err(Error::IndexOutOfRange { index: j, n });
        }
        Ok(Self { n, entries })
    }

    pub fn zeros(n: usize) -> Self {
        Self { n, entries: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    /// Indices carrying an explicit entry.
    pub fn support(&self) -> Vec<usize> {
        self.entries.iter().map(|&(j, _)| j).collect()
    }

    pub fn get(&self, index: usize) -> f64 {
        match self.entries.binary_search_by_key(&index, |&(j, _)| j) {
            Ok(pos) => self.entries[pos].1,
            Err(_) => 0.0,
        }
    }

    pub fn sum(&self) -> f64 {
        self.entries.iter().map(|&(_, v)| v).sum()
    }

    /// Dot product against a dense slice of length `n`.
    pub fn dot_dense(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: x.len() });
        }
        Ok(self.entries.iter().map(|&(j, v)| v * x[j]).sum())
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        for &(j, v) in &self.entries {
            x[j] = v;
        }
        x
    }
}

// ---------------------------------------------------------------------------
// Target vectors and means
// ---------------------------------------------------------------------------

/// Uniform target weight vector: `b_j = 1/|target|` on the target set,
/// zero elsewhere.
pub fn make_target_vector(target: &[usize], n: usize) -> Result<SparseVec> {
    if target.is_empty() {
        return Err(Error::DegenerateTarget);
    }
    let set: BTreeSet<usize> = target.iter().copied().collect();
    if set.len() != target.len() {
        return Err(Error::MalformedSchema("duplicate index in target set".into()));
    }
    if let Some(&j) = set.iter().find(|&&j| j >= n) {
        return Err(Error::IndexOutOfRange { index: j, n });
    }
    let w = 1.0 / set.len() as f64;
    SparseVec::new(n, set.into_iter().map(|j| (j, w)).collect())
}

/// The target mean `b^T x`.
pub fn target_mean(b: &SparseVec, x: &DataValues) -> Result<f64> {
    b.dot_dense(x.values())
}

// ---------------------------------------------------------------------------
// Scenarios
// ---------------------------------------------------------------------------

/// One (sample set, target weights, probability) atom of a distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    sample: Vec<usize>,
    target_weights: SparseVec,
    probability: f64,
}

impl Scenario {
    /// Build a scenario over a population of size `n`. The sample may be
    /// empty (nothing observed) and may intersect the target.
    pub fn new(n: usize, sample: &[usize], target: &[usize], probability: f64) -> Result<Self> {
        let sample_set: BTreeSet<usize> = sample.iter().copied().collect();
        if sample_set.len() != sample.len() {
            return Err(Error::MalformedSchema("duplicate index in sample set".into()));
        }
        if let Some(&j) = sample_set.iter().find(|&&j| j >= n) {
            return Err(Error::IndexOutOfRange { index: j, n });
        }
        if !(probability >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "scenario probability must be nonnegative, got {probability}"
            )));
        }
        Ok(Self {
            sample: sample_set.into_iter().collect(),
            target_weights: make_target_vector(target, n)?,
            probability,
        })
    }

    /// Sorted sample indices.
    pub fn sample(&self) -> &[usize] {
        &self.sample
    }

    pub fn target_weights(&self) -> &SparseVec {
        &self.target_weights
    }

    /// Sorted target indices (support of the weight vector).
    pub fn target_support(&self) -> Vec<usize> {
        self.target_weights.support()
    }

    pub fn probability(&self) -> f64 {
        self.probability
    }

    pub fn population_size(&self) -> usize {
        self.target_weights.dim()
    }
}

// ---------------------------------------------------------------------------
// Distributions
// ---------------------------------------------------------------------------

/// A finite weighted list of scenarios over a population of size `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioDistribution {
    n: usize,
    scenarios: Vec<Scenario>,
    provenance: Option<String>,
}

impl ScenarioDistribution {
    /// Validates: non-empty, indices in range, probabilities sum to 1
    /// within [`PROB_SUM_TOL`].
    pub fn new(n: usize, scenarios: Vec<Scenario>) -> Result<Self> {
        if scenarios.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        for s in &scenarios {
            if s.population_size() != n {
                return Err(Error::DimensionMismatch { expected: n, got: s.population_size() });
            }
        }
        let sum: f64 = scenarios.iter().map(|s| s.probability).sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::ProbabilitySum { sum, tol: PROB_SUM_TOL });
        }
        Ok(Self { n, scenarios, provenance: None })
    }

    /// Uniform distribution (probability `1/m` each) over the given
    /// (sample, target) pairs.
    pub fn uniform(n: usize, pairs: &[(Vec<usize>, Vec<usize>)]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        let p = 1.0 / pairs.len() as f64;
        let scenarios = pairs
            .iter()
            .map(|(a, b)| Scenario::new(n, a, b, p))
            .collect::<Result<Vec<_>>>()?;
        Self::new(n, scenarios)
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = Some(provenance.into());
        self
    }

    pub fn population_size(&self) -> usize {
        self.n
    }

    pub fn scenarios(&self) -> &[Scenario] {
        &self.scenarios
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn provenance(&self) -> Option<&str> {
        self.provenance.as_deref()
    }

    /// Optional normalization pass: merge scenarios with identical
    /// (sample, target) pairs, summing probabilities. Duplicates are legal
    /// and kept separate everywhere else.
    pub fn merge_duplicates(&self) -> Self {
        let mut merged: Vec<Scenario> = Vec::new();
        for s in &self.scenarios {
            match merged.iter_mut().find(|m| {
                m.sample == s.sample && m.target_weights == s.target_weights
            }) {
                Some(m) => m.probability += s.probability,
                None => merged.push(s.clone()),
            }
        }
        Self { n: self.n, scenarios: merged, provenance: self.provenance.clone() }
    }
}

// ---------------------------------------------------------------------------
// Data values
// ---------------------------------------------------------------------------

/// A dense vector of per-index data values.
#[derive(Debug, Clone, PartialEq)]
pub struct DataValues {
    values: Vec<f64>,
}

impl DataValues {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Check the worst-case normalization `|x_j| ≤ 1` (plus slack), which
    /// the certification machinery assumes.
    pub fn validate_normalized(&self) -> Result<()> {
        for (j, &v) in self.values.iter().enumerate() {
            if !(v.abs() <= 1.0 + VALUE_BOUND_TOL) {
                return Err(Error::InvalidConfig(format!(
                    "value x_{j} = {v} exceeds the unit bound"
                )));
            }
        }
        Ok(())
    }

    /// Parse from a JSON array of floats or a single CSV column (one value
    /// per line; an optional non-numeric header line is skipped).
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let trimmed = text.trim_start();
        if trimmed.starts_with('[') {
            let values: Vec<f64> = serde_json::from_str(trimmed)?;
            return Ok(Self::new(values));
        }
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            match line.parse::<f64>() {
                Ok(v) => values.push(v),
                Err(_) if lineno == 0 => continue, // header
                Err(_) => {
                    return Err(Error::MalformedSchema(format!(
                        "line {}: cannot parse value {line:?}",
                        lineno + 1
                    )))
                }
            }
        }
        if values.is_empty() {
            return Err(Error::MalformedSchema("no data values found".into()));
        }
        Ok(Self::new(values))
    }
}

// ---------------------------------------------------------------------------
// JSON interchange
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ScenarioJson {
    sample: Vec<usize>,
    target: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    prob: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct DistributionJson {
    n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<String>,
    scenarios: Vec<ScenarioJson>,
}

impl ScenarioDistribution {
    pub fn to_json(&self) -> String {
        let doc = DistributionJson {
            n: self.n,
            provenance: self.provenance.clone(),
            scenarios: self
                .scenarios
                .iter()
                .map(|s| ScenarioJson {
                    sample: s.sample.clone(),
                    target: s.target_support(),
                    prob: Some(s.probability),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("distribution serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: DistributionJson =
            serde_json::from_str(text).map_err(|e| Error::MalformedSchema(e.to_string()))?;
        if doc.scenarios.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        let explicit: f64 = doc.scenarios.iter().filter_map(|s| s.prob).sum();
        let omitted = doc.scenarios.iter().filter(|s| s.prob.is_none()).count();
        let fill = if omitted > 0 {
            let leftover = 1.0 - explicit;
            if leftover < -PROB_SUM_TOL {
                return Err(Error::ProbabilitySum { sum: explicit, tol: PROB_SUM_TOL });
            }
            leftover.max(0.0) / omitted as f64
        } else {
            0.0
        };
        let scenarios = doc
            .scenarios
            .iter()
            .map(|s| Scenario::new(doc.n, &s.sample, &s.target, s.prob.unwrap_or(fill)))
            .collect::<Result<Vec<_>>>()?;
        let dist = Self::new(doc.n, scenarios)?;
        Ok(match doc.provenance {
            Some(p) => dist.with_provenance(p),
            None => dist,
        })
    }
}

/// Read a distribution from a JSON file.
pub fn load_distribution(path: &Path) -> Result<ScenarioDistribution> {
    ScenarioDistribution::from_json(&std::fs::read_to_string(path)?)
}

/// Write a distribution to a JSON file. `load ∘ save` is the identity on
/// indices and probabilities (floats round-trip exactly through JSON).
pub fn save_distribution(dist: &ScenarioDistribution, path: &Path) -> Result<()> {
    std::fs::write(path, dist.to_json())?;
    Ok(())
}

// ---------------------------------------------------------------------------
