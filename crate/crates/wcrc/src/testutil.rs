//! Shared fixtures and random-instance generators for unit tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::scenario::{Scenario, ScenarioDistribution, SparseVec};

/// The weighted 4-point reference distribution (probabilities
/// 0.3/0.3/0.3/0.05/0.05, 0-based indices). Its optimal semilinear
/// estimator has worst-case expected squared error ≈ 0.6652.
pub(crate) fn weighted_four_point_json() -> &'static str {
    r#"{
        "n": 4,
        "scenarios": [
            {"sample": [0, 2], "target": [1, 3], "prob": 0.3},
            {"sample": [1, 3], "target": [0, 2], "prob": 0.3},
            {"sample": [2, 3], "target": [0, 1], "prob": 0.3},
            {"sample": [0, 2, 3], "target": [1], "prob": 0.05},
            {"sample": [1, 2, 3], "target": [0], "prob": 0.05}
        ]
    }"#
}

pub(crate) fn weighted_four_point() -> ScenarioDistribution {
    ScenarioDistribution::from_json(weighted_four_point_json()).unwrap()
}

/// Random distribution with `m` scenarios over `n` indices, explicit
/// normalized probabilities, non-empty targets, possibly empty samples.
pub(crate) fn random_distribution(n: usize, m: usize, rng: &mut ChaCha12Rng) -> ScenarioDistribution {
    let mut weights: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    weights[0] += 1.0 - weights.iter().sum::<f64>();
    let scenarios = weights
        .iter()
        .map(|&p| {
            let sample: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.5)).collect();
            let mut target: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.4)).collect();
            if target.is_empty() {
                target.push(rng.random_range(0..n));
            }
            Scenario::new(n, &sample, &target, p).unwrap()
        })
        .collect();
    ScenarioDistribution::new(n, scenarios).unwrap()
}

/// Random semilinear weights for each scenario of `dist`, supported on the
/// sample sets, entries in `[-scale, scale]`.
pub(crate) fn random_weights(
    dist: &ScenarioDistribution,
    scale: f64,
    rng: &mut ChaCha12Rng,
) -> Vec<SparseVec> {
    dist.scenarios()
        .iter()
        .map(|s| {
            let entries = s
                .sample()
                .iter()
                .map(|&j| (j, rng.random_range(-scale..=scale)))
                .collect();
            SparseVec::new(dist.population_size(), entries).unwrap()
        })
        .collect()
}

pub(crate) fn rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}
