//! Generators for the three data-collection processes: independent
//! inclusion with per-index probabilities (importance sampling), recruitment
//! over a geometric k-nearest-neighbor population (snowball sampling), and
//! chronological prefix samples with dyadic target windows (selective
//! prediction).
//!
//! Generators are pure functions of (config, seed): one ChaCha stream per
//! invocation, bit-reproducible across runs and platforms.

use rand::seq::index::sample as index_sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{DataValues, Scenario, ScenarioDistribution};

// ---------------------------------------------------------------------------
// Importance sampling
// ---------------------------------------------------------------------------

/// Independent-inclusion process: index `j` joins the sample with
/// probability `inclusion_probs[j]`; the target is the full population.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImportanceConfig {
    /// Per-index inclusion probabilities, each in (0, 1].
    pub inclusion_probs: Vec<f64>,
    /// Number of Monte-Carlo scenarios to draw.
    pub num_scenarios: usize,
    #[serde(default)]
    pub rng_seed: u64,
}

impl ImportanceConfig {
    fn validate(&self) -> Result<()> {
        if self.inclusion_probs.is_empty() {
            return Err(Error::InvalidConfig("inclusion_probs is empty".into()));
        }
        if self.num_scenarios == 0 {
            return Err(Error::InvalidConfig("num_scenarios must be positive".into()));
        }
        for (j, &p) in self.inclusion_probs.iter().enumerate() {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "inclusion probability p_{j} = {p} outside (0, 1]"
                )));
            }
        }
        Ok(())
    }
}

/// Draw `num_scenarios` independent-inclusion scenarios with uniform
/// scenario probabilities. Empty draws are redrawn, so every sample is
/// non-empty; with realistic probabilities the induced bias is negligible.
pub fn gen_importance(cfg: &ImportanceConfig) -> Result<ScenarioDistribution> {
    cfg.validate()?;
    let n = cfg.inclusion_probs.len();
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.rng_seed);
    let target: Vec<usize> = (0..n).collect();
    let prob = 1.0 / cfg.num_scenarios as f64;
    let mut scenarios = Vec::with_capacity(cfg.num_scenarios);
    for _ in 0..cfg.num_scenarios {
        let sample = loop {
            let draw: Vec<usize> = (0..n)
                .filter(|&j| rng.random::<f64>() < cfg.inclusion_probs[j])
                .collect();
            if !draw.is_empty() {
                break draw;
            }
        };
        scenarios.push(Scenario::new(n, &sample, &target, prob)?);
    }
    Ok(ScenarioDistribution::new(n, scenarios)?.with_provenance(format!(
        "importance(n={n}, m={}, seed={})",
        cfg.num_scenarios, cfg.rng_seed
    )))
}

// ---------------------------------------------------------------------------
// Snowball sampling
// ---------------------------------------------------------------------------

/// Snowball recruitment over a fresh geometric population.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnowballConfig {
    /// Population size.
    pub num_points: usize,
    /// Neighbors per node in the k-NN graph.
    #[serde(default = "default_neighbor_count")]
    pub neighbor_count: usize,
    /// How many of its neighbors each sampled node recruits.
    #[serde(default = "default_recruits")]
    pub recruits_per_node: usize,
    /// Recruitment stops once the sample reaches this size.
    pub sample_size: usize,
    /// Number of Monte-Carlo scenarios to draw.
    pub num_scenarios: usize,
    #[serde(default)]
    pub rng_seed: u64,
}

fn default_neighbor_count() -> usize {
    5
}

fn default_recruits() -> usize {
    2
}

impl SnowballConfig {
    fn validate(&self) -> Result<()> {
        if self.num_scenarios == 0 {
            return Err(Error::InvalidConfig("num_scenarios must be positive".into()));
        }
        if !(self.recruits_per_node <= self.neighbor_count && self.neighbor_count < self.num_points)
        {
            return Err(Error::InvalidConfig(format!(
                "need recruits_per_node ({}) <= neighbor_count ({}) < num_points ({})",
                self.recruits_per_node, self.neighbor_count, self.num_points
            )));
        }
        if self.sample_size < 1 || self.sample_size > self.num_points {
            return Err(Error::InvalidConfig(format!(
                "sample_size {} outside [1, {}]",
                self.sample_size, self.num_points
            )));
        }
        Ok(())
    }
}

/// Points in the unit square with their k-nearest-neighbor lists.
#[derive(Debug, Clone)]
pub struct GeometricPopulation {
    points: Vec<[f64; 2]>,
    adjacency: Vec<Vec<usize>>,
}

impl GeometricPopulation {
    /// Draw `n` points uniformly from the unit square and link each to its
    /// `k` nearest neighbors (ties broken by index, self excluded).
    pub fn sample(n: usize, k: usize, rng: &mut ChaCha12Rng) -> Result<Self> {
        if k >= n {
            return Err(Error::InvalidConfig(format!("need k ({k}) < n ({n})")));
        }
        let points: Vec<[f64; 2]> =
            (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
        let adjacency = points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let mut others: Vec<(f64, usize)> = points
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(j, q)| {
                        let d = (p[0] - q[0]).hypot(p[1] - q[1]);
                        (d, j)
                    })
                    .collect();
                others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                others.truncate(k);
                others.into_iter().map(|(_, j)| j).collect()
            })
            .collect();
        Ok(Self { points, adjacency })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    /// Neighbor list of node `i`, sorted by distance.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    /// Coordinates as CSV (`index,x,y` with header), for plotting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,x,y\n");
        for (i, p) in self.points.iter().enumerate() {
            out.push_str(&format!("{i},{},{}\n", p[0], p[1]));
        }
        out
    }
}

/// One snowball growth: returns the sample and the recruitment edges
/// (recruiter, recruit) actually used. Reseeds with a fresh uniformly
/// random unrecruited point whenever the frontier empties early.
fn grow_snowball(
    pop: &GeometricPopulation,
    recruits_per_node: usize,
    sample_size: usize,
    rng: &mut ChaCha12Rng,
) -> (Vec<usize>, Vec<(usize, usize)>) {
    let n = pop.len();
    let mut in_sample = vec![false; n];
    let mut sample = Vec::with_capacity(sample_size);
    let mut frontier = std::collections::VecDeque::new();
    let mut edges = Vec::new();

    let admit = |j: usize,
                     from: Option<usize>,
                     sample: &mut Vec<usize>,
                     in_sample: &mut Vec<bool>,
                     frontier: &mut std::collections::VecDeque<usize>,
                     edges: &mut Vec<(usize, usize)>| {
        in_sample[j] = true;
        sample.push(j);
        frontier.push_back(j);
        if let Some(v) = from {
            edges.push((v, j));
        }
    };

    let seed = rng.random_range(0..n);
    admit(seed, None, &mut sample, &mut in_sample, &mut frontier, &mut edges);

    while sample.len() < sample_size {
        let Some(v) = frontier.pop_front() else {
            // frontier exhausted: seed a fresh uniformly random unrecruited point
            let remaining: Vec<usize> = (0..n).filter(|&j| !in_sample[j]).collect();
            let fresh = remaining[rng.random_range(0..remaining.len())];
            admit(fresh, None, &mut sample, &mut in_sample, &mut frontier, &mut edges);
            continue;
        };
        let nbrs = pop.neighbors(v);
        let picks = index_sample(rng, nbrs.len(), recruits_per_node);
        for idx in picks.iter() {
            let j = nbrs[idx];
            if !in_sample[j] {
                admit(j, Some(v), &mut sample, &mut in_sample, &mut frontier, &mut edges);
                if sample.len() == sample_size {
                    break;
                }
            }
        }
    }
    sample.sort_unstable();
    (sample, edges)
}

/// Draw one geometric population, then `num_scenarios` snowball samples of
/// exactly `sample_size` points each; the target is the full population.
pub fn gen_snowball(cfg: &SnowballConfig) -> Result<(GeometricPopulation, ScenarioDistribution)> {
    cfg.validate()?;
    let n = cfg.num_points;
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.rng_seed);
    let pop = GeometricPopulation::sample(n, cfg.neighbor_count, &mut rng)?;
    let target: Vec<usize> = (0..n).collect();
    let prob = 1.0 / cfg.num_scenarios as f64;
    let mut scenarios = Vec::with_capacity(cfg.num_scenarios);
    for _ in 0..cfg.num_scenarios {
        let (sample, _) = grow_snowball(&pop, cfg.recruits_per_node, cfg.sample_size, &mut rng);
        scenarios.push(Scenario::new(n, &sample, &target, prob)?);
    }
    let dist = ScenarioDistribution::new(n, scenarios)?.with_provenance(format!(
        "snowball(n={n}, k={}, r={}, s={}, m={}, seed={})",
        cfg.neighbor_count, cfg.recruits_per_node, cfg.sample_size, cfg.num_scenarios, cfg.rng_seed
    ));
    Ok((pop, dist))
}

/// Spatially correlated values: `x_j = (coord_x + coord_y) - 1`, an affine
/// map of the raw coordinate sum from [0, 2] into [-1, 1] as the
/// worst-case machinery requires.
pub fn spatial_values(pop: &GeometricPopulation) -> DataValues {
    DataValues::new(pop.points.iter().map(|p| p[0] + p[1] - 1.0).collect())
}

// ---------------------------------------------------------------------------
// Selective prediction
// ---------------------------------------------------------------------------

/// Chronological process: the sample is a uniformly random prefix
/// `{0, …, t-1}`, the target a window of dyadic length after it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectiveConfig {
    /// Population size; must be a power of two (the window set
    /// `{1, 2, 4, …, n/2}` is only defined there).
    pub n: usize,
    #[serde(default)]
    pub rng_seed: u64,
    /// Enumerate the full support exactly (default) instead of sampling.
    #[serde(default = "default_true")]
    pub exact_enumeration: bool,
    /// Monte-Carlo draw count; only used when `exact_enumeration` is false.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_scenarios: Option<usize>,
}

fn default_true() -> bool {
    true
}

impl SelectiveConfig {
    pub fn enumerated(n: usize) -> Self {
        Self { n, rng_seed: 0, exact_enumeration: true, num_scenarios: None }
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 || !self.n.is_power_of_two() {
            return Err(Error::InvalidConfig(format!(
                "selective prediction needs n a power of two >= 2, got {}",
                self.n
            )));
        }
        Ok(())
    }
}

fn selective_scenario(n: usize, t: usize, w: usize, prob: f64) -> Result<Scenario> {
    // 0-based: sample = {0..t-1}, target = {t..min(t+w, n)-1}
    let sample: Vec<usize> = (0..t).collect();
    let target: Vec<usize> = (t..(t + w).min(n)).collect();
    Scenario::new(n, &sample, &target, prob)
}

/// All (t, w) pairs with `t ∈ {1..n-1}` and `w ∈ {1, 2, 4, …, n/2}`, each
/// with probability `1/((n-1)·log₂ n)`; or a Monte-Carlo draw over the
/// same pairs when enumeration is disabled. Enumeration consumes no
/// randomness.
pub fn gen_selective(cfg: &SelectiveConfig) -> Result<ScenarioDistribution> {
    cfg.validate()?;
    let n = cfg.n;
    let log_n = n.trailing_zeros() as usize;
    let windows: Vec<usize> = (0..log_n).map(|e| 1usize << e).collect();
    let scenarios = if cfg.exact_enumeration {
        let m = (n - 1) * log_n;
        let prob = 1.0 / m as f64;
        let mut list = Vec::with_capacity(m);
        for t in 1..n {
            for &w in &windows {
                list.push(selective_scenario(n, t, w, prob)?);
            }
        }
        list
    } else {
        let m = cfg.num_scenarios.unwrap_or((n - 1) * log_n);
        if m == 0 {
            return Err(Error::InvalidConfig("num_scenarios must be positive".into()));
        }
        let mut rng = ChaCha12Rng::seed_from_u64(cfg.rng_seed);
        let prob = 1.0 / m as f64;
        (0..m)
            .map(|_| {
                let t = rng.random_range(1..n);
                let w = windows[rng.random_range(0..windows.len())];
                selective_scenario(n, t, w, prob)
            })
            .collect::<Result<Vec<_>>>()?
    };
    Ok(ScenarioDistribution::new(n, scenarios)?.with_provenance(format!(
        "selective(n={n}, {})",
        if cfg.exact_enumeration { "enumerated".to_string() } else { format!("mc seed={}", cfg.rng_seed) }
    )))
}

// ---------------------------------------------------------------------------
