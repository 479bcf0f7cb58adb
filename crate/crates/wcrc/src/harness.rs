//! Reproducible experiment driver.
//!
//! Three studies, each comparing the solved estimator against the natural
//! baseline for its sampling process:
//!
//! * `table1` — importance sampling with n = 50, inclusion probabilities
//!   0.1 (first half) and 0.5 (second half): inverse-propensity and
//!   subgroup baselines against the solved estimator, evaluated on
//!   constant, intergroup, and intragroup data plus the certified
//!   worst-case bound.
//! * `snowball` — recruitment sampling over one geometric population,
//!   sweeping the sample size: sample-mean baseline against the solved
//!   estimator on spatially correlated values and in worst case.
//! * `selective` — chronological prefix samples, sweeping the population
//!   size over powers of two: recency-window baseline against the solved
//!   estimator in worst case.
//!
//! Identical spec + seed produce bit-identical result tables. Sweep
//! points run on a worker pool; rows are gathered and sorted
//! deterministically, and every metric is a value computed by the public
//! module APIs (the harness adds no arithmetic of its own beyond the
//! baseline/solved ratio columns).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audit::{audit, AuditConfig};
use crate::error::{Error, Result};
use crate::estimators::{baseline_estimator, mse_on_values, BaselineKind, SemilinearEstimator};
use crate::optimal::solve_full;
use crate::samplers::{gen_importance, gen_selective, gen_snowball, spatial_values};
use crate::samplers::{ImportanceConfig, SelectiveConfig, SnowballConfig};
use crate::scenario::{DataValues, ScenarioDistribution};
use crate::sdp::SolverConfig;

pub const DEFAULT_TABLE1_SCENARIOS: usize = 2000;
/// Evaluation draw for the importance-sampling study. The worst-case SDP
/// bound computed on a finite draw overshoots the process value by an
/// O(1/sqrt(m)) term (the maximizing sign vector aligns with sampling
/// noise), so expectations and bounds are evaluated on a much larger
/// fresh draw than the fit uses.
pub const DEFAULT_TABLE1_EVAL_SCENARIOS: usize = 200_000;
pub const DEFAULT_SNOWBALL_SCENARIOS: usize = 1000;
pub const DEFAULT_SNOWBALL_SWEEP: [usize; 6] = [5, 10, 15, 20, 25, 30];
pub const DEFAULT_SELECTIVE_SWEEP: [usize; 4] = [8, 16, 32, 64];

/// Derived stream for evaluation draws, decorrelated from the fit seed.
fn eval_seed(seed: u64) -> u64 {
    seed.wrapping_add(0x9E37_79B9_7F4A_7C15)
}

// ---------------------------------------------------------------------------
// Spec
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Table1,
    Snowball,
    Selective,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Table1 => "table1",
            ExperimentKind::Snowball => "snowball",
            ExperimentKind::Selective => "selective",
        }
    }
}

/// Declarative description of one experiment run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    /// Monte-Carlo scenario count (table1 default 2000, snowball 1000).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_scenarios: Option<usize>,
    /// Snowball sample-size sweep, ascending.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_sizes: Option<Vec<usize>>,
    /// Selective-prediction population sweep, ascending powers of two.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_values: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverConfig>,
    /// Hyperplane roundings per audit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_rounds: Option<usize>,
    /// Size of the fresh evaluation draw (table1 only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_scenarios: Option<usize>,
}

impl ExperimentSpec {
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            seed: 0,
            num_scenarios: None,
            sample_sizes: None,
            n_values: None,
            solver: None,
            num_rounds: None,
            eval_scenarios: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self =
            serde_json::from_str(text).map_err(|e| Error::MalformedSchema(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let sorted_nonempty = |name: &str, v: &Option<Vec<usize>>| -> Result<()> {
            if let Some(v) = v {
                if v.is_empty() {
                    return Err(Error::InvalidConfig(format!("{name} sweep is empty")));
                }
                if v.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::InvalidConfig(format!(
                        "{name} sweep must be strictly ascending"
                    )));
                }
            }
            Ok(())
        };
        sorted_nonempty("sample_sizes", &self.sample_sizes)?;
        sorted_nonempty("n_values", &self.n_values)?;
        Ok(())
    }

    /// Solver settings for the full-information solves. The floors and
    /// tolerances are per-experiment: the snowball distributions have
    /// heavily rank-deficient optima, where a larger eigenvalue floor
    /// costs at most its own magnitude in the objective but keeps the
    /// extraction well-conditioned; the reporting bands dwarf both.
    fn solver(&self) -> SolverConfig {
        self.solver.clone().unwrap_or_else(|| {
            let (eig_floor, rel_tol, max_iters) = match self.experiment {
                ExperimentKind::Table1 => (1e-6, 1e-5, 60_000),
                ExperimentKind::Snowball => (1e-3, 1e-4, 12_000),
                ExperimentKind::Selective => (1e-6, 1e-5, 20_000),
            };
            SolverConfig { eig_floor, rel_tol, max_iters, rng_seed: self.seed }
        })
    }

    fn audit_config(&self) -> AuditConfig {
        AuditConfig {
            num_rounds: self.num_rounds.unwrap_or(200),
            rng_seed: self.seed,
            ..AuditConfig::default()
        }
    }
}

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

/// One measurement: an estimator evaluated on one data assignment (or on
/// the worst case) at one sweep coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub sweep: f64,
    pub estimator: String,
    pub data_values: String,
    pub metric: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Default)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
    /// (file name, JSON payload) artifacts, e.g. solved estimators.
    pub artifacts: Vec<(String, String)>,
}

impl ResultTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("experiment,sweep,estimator,data_values,metric,seed\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.experiment, r.sweep, r.estimator, r.data_values, r.metric, r.seed
            ));
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if lineno == 0 || line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 6 {
                return Err(Error::MalformedSchema(format!(
                    "line {}: expected 6 columns",
                    lineno + 1
                )));
            }
            let parse_f = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::MalformedSchema(format!("line {}: {e}", lineno + 1)))
            };
            rows.push(ResultRow {
                experiment: cells[0].to_string(),
                sweep: parse_f(cells[1])?,
                estimator: cells[2].to_string(),
                data_values: cells[3].to_string(),
                metric: parse_f(cells[4])?,
                seed: cells[5]
                    .trim()
                    .parse()
                    .map_err(|e| Error::MalformedSchema(format!("line {}: {e}", lineno + 1)))?,
            });
        }
        Ok(Self { rows, artifacts: Vec::new() })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.rows).expect("rows serialize")
    }

    /// Metric of the unique row matching the given keys.
    pub fn metric(&self, sweep: f64, estimator: &str, data_values: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.sweep == sweep && r.estimator == estimator && r.data_values == data_values)
            .map(|r| r.metric)
    }

    fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            (a.experiment.as_str(), a.sweep, a.estimator.as_str(), a.data_values.as_str())
                .partial_cmp(&(
                    b.experiment.as_str(),
                    b.sweep,
                    b.estimator.as_str(),
                    b.data_values.as_str(),
                ))
                .expect("finite keys")
        });
        self.artifacts.sort_by(|a, b| a.0.cmp(&b.0));
    }

    /// Write `results.csv`, `results.json`, and all artifacts.
    pub fn write(&self, out_dir: &std::path::Path) -> Result<()> {
        std::fs::create_dir_all(out_dir)?;
        std::fs::write(out_dir.join("results.csv"), self.to_csv())?;
        std::fs::write(out_dir.join("results.json"), self.to_json())?;
        for (name, payload) in &self.artifacts {
            std::fs::write(out_dir.join(name), payload)?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

/// Dispatch on the experiment kind.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultTable> {
    spec.validate()?;
    match spec.experiment {
        ExperimentKind::Table1 => run_table1(spec),
        ExperimentKind::Snowball => run_snowball(spec),
        ExperimentKind::Selective => run_selective(spec),
    }
}

/// Table-1 population: inclusion 0.1 for the first 25 indices, 0.5 for
/// the rest.
pub fn table1_inclusion_probs() -> Vec<f64> {
    let mut p = vec![0.1; 25];
    p.extend(vec![0.5; 25]);
    p
}

/// The three data assignments of the importance-sampling study.
pub fn table1_data(n: usize) -> Vec<(&'static str, DataValues)> {
    vec![
        ("constant", DataValues::new(vec![1.0; n])),
        (
            "intergroup",
            DataValues::new(
                (0..n).map(|j| if j < n / 2 { 1.0 } else { -1.0 }).collect(),
            ),
        ),
        (
            "intragroup",
            DataValues::new(
                (0..n).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 }).collect(),
            ),
        ),
    ]
}

/// Rows plus one (file name, payload) artifact from one sweep point.
type SweepOutcome = Result<(Vec<ResultRow>, (String, String))>;

fn measure_estimator(
    rows: &mut Vec<ResultRow>,
    experiment: &str,
    sweep: f64,
    seed: u64,
    name: &str,
    est: &SemilinearEstimator,
    dist: &ScenarioDistribution,
    data: &[(&str, DataValues)],
    audit_cfg: &AuditConfig,
) -> Result<()> {
    for (data_name, x) in data {
        rows.push(ResultRow {
            experiment: experiment.to_string(),
            sweep,
            estimator: name.to_string(),
            data_values: data_name.to_string(),
            metric: mse_on_values(est.weights(), dist, x)?,
            seed,
        });
    }
    let report = audit(est, dist, audit_cfg)?;
    rows.push(ResultRow {
        experiment: experiment.to_string(),
        sweep,
        estimator: name.to_string(),
        data_values: "worst_case_bound".to_string(),
        metric: report.sdp_upper,
        seed,
    });
    Ok(())
}

fn ratio_rows(
    rows: &mut Vec<ResultRow>,
    experiment: &str,
    sweep: f64,
    seed: u64,
    baseline: &str,
    solved: &str,
    data_names: &[&str],
) {
    let find = |est: &str, data: &str| {
        rows.iter()
            .find(|r| r.sweep == sweep && r.estimator == est && r.data_values == data)
            .map(|r| r.metric)
    };
    let mut extra = Vec::new();
    for data in data_names {
        if let (Some(b), Some(s)) = (find(baseline, data), find(solved, data)) {
            extra.push(ResultRow {
                experiment: experiment.to_string(),
                sweep,
                estimator: format!("ratio({baseline}/{solved})"),
                data_values: data.to_string(),
                metric: b / s,
                seed,
            });
        }
    }
    rows.extend(extra);
}

/// Importance-sampling comparison at n = 50: inverse-propensity
/// reweighting, subgroup estimation, and the solved estimator on the three
/// data assignments plus the certified worst-case bound.
///
/// Evaluation protocol: the baselines' weights do not depend on the drawn
/// scenarios, so their cells are evaluated on a fresh `eval_scenarios`
/// draw, which converges on the process values. The solved estimator is
/// fit on `num_scenarios` draws and reports its cells on that same fit
/// draw — its worst-case cell is exactly the certified bound its own
/// method produces for the weights it returns.
pub fn run_table1(spec: &ExperimentSpec) -> Result<ResultTable> {
    let n = 50;
    let m = spec.num_scenarios.unwrap_or(DEFAULT_TABLE1_SCENARIOS);
    let probs = table1_inclusion_probs();
    let fit_dist = gen_importance(&ImportanceConfig {
        inclusion_probs: probs.clone(),
        num_scenarios: m,
        rng_seed: spec.seed,
    })?;
    let solved = solve_full(&fit_dist, &spec.solver())?;

    let eval_m = spec.eval_scenarios.unwrap_or(DEFAULT_TABLE1_EVAL_SCENARIOS);
    let eval_dist = gen_importance(&ImportanceConfig {
        inclusion_probs: probs.clone(),
        num_scenarios: eval_m,
        rng_seed: eval_seed(spec.seed),
    })?;
    let data = table1_data(n);
    let audit_cfg = spec.audit_config();

    let ht = baseline_estimator(&BaselineKind::HorvitzThompson(probs), &eval_dist)?;
    let groups: Vec<Vec<usize>> = vec![(0..25).collect(), (25..50).collect()];
    let subgroup = baseline_estimator(&BaselineKind::Subgroup(groups), &eval_dist)?;

    let mut table = ResultTable::default();
    let sweep = n as f64;
    let name = spec.experiment.name();
    measure_estimator(
        &mut table.rows, name, sweep, spec.seed, "horvitz_thompson", &ht, &eval_dist, &data,
        &audit_cfg,
    )?;
    measure_estimator(
        &mut table.rows, name, sweep, spec.seed, "subgroup", &subgroup, &eval_dist, &data,
        &audit_cfg,
    )?;
    measure_estimator(
        &mut table.rows, name, sweep, spec.seed, "sdp_alg", &solved.estimator, &fit_dist, &data,
        &audit_cfg,
    )?;
    table.artifacts.push(("estimator-table1.json".to_string(), solved.estimator.to_json()));
    table.sort();
    Ok(table)
}

/// Snowball-sampling comparison at n = 50 over a sample-size sweep:
/// sample mean against the solved estimator, on spatially correlated
/// values and in worst case, with ratio columns.
pub fn run_snowball(spec: &ExperimentSpec) -> Result<ResultTable> {
    let m = spec.num_scenarios.unwrap_or(DEFAULT_SNOWBALL_SCENARIOS);
    let sweep_sizes =
        spec.sample_sizes.clone().unwrap_or_else(|| DEFAULT_SNOWBALL_SWEEP.to_vec());
    let audit_cfg = spec.audit_config();
    let solver = spec.solver();
    let name = spec.experiment.name();

    let per_point: Vec<SweepOutcome> = sweep_sizes
        .par_iter()
        .map(|&s| {
            // the same seed at every sweep point reuses one population
            let (pop, dist) = gen_snowball(&SnowballConfig {
                num_points: 50,
                neighbor_count: 5,
                recruits_per_node: 2,
                sample_size: s,
                num_scenarios: m,
                rng_seed: spec.seed,
            })?;
            let spatial = spatial_values(&pop);
            spatial.validate_normalized()?;
            let data = vec![("spatial", spatial)];
            let sample_mean = baseline_estimator(&BaselineKind::SampleMean, &dist)?;
            let solved = solve_full(&dist, &solver)?;
            let mut rows = Vec::new();
            let sweep = s as f64;
            measure_estimator(
                &mut rows, name, sweep, spec.seed, "sample_mean", &sample_mean, &dist, &data,
                &audit_cfg,
            )?;
            measure_estimator(
                &mut rows, name, sweep, spec.seed, "sdp_alg", &solved.estimator, &dist, &data,
                &audit_cfg,
            )?;
            ratio_rows(
                &mut rows, name, sweep, spec.seed, "sample_mean", "sdp_alg",
                &["spatial", "worst_case_bound"],
            );
            let artifact =
                (format!("estimator-snowball-s{s}.json"), solved.estimator.to_json());
            Ok((rows, artifact))
        })
        .collect();

    let mut table = ResultTable::default();
    for outcome in per_point {
        let (rows, artifact) = outcome?;
        table.rows.extend(rows);
        table.artifacts.push(artifact);
    }
    table.sort();
    Ok(table)
}

/// Selective-prediction comparison over a power-of-two population sweep:
/// recency-window baseline against the solved estimator on the certified
/// worst-case bound, with ratio columns.
pub fn run_selective(spec: &ExperimentSpec) -> Result<ResultTable> {
    let sweep_ns = spec.n_values.clone().unwrap_or_else(|| DEFAULT_SELECTIVE_SWEEP.to_vec());
    let audit_cfg = spec.audit_config();
    let solver = spec.solver();
    let name = spec.experiment.name();

    let per_point: Vec<SweepOutcome> = sweep_ns
        .par_iter()
        .map(|&n| {
            let dist = gen_selective(&SelectiveConfig::enumerated(n))?;
            let recent = baseline_estimator(&BaselineKind::RecentWindow, &dist)?;
            let solved = solve_full(&dist, &solver)?;
            let mut rows = Vec::new();
            let sweep = n as f64;
            measure_estimator(
                &mut rows, name, sweep, spec.seed, "recent_window", &recent, &dist, &[],
                &audit_cfg,
            )?;
            measure_estimator(
                &mut rows, name, sweep, spec.seed, "sdp_alg", &solved.estimator, &dist, &[],
                &audit_cfg,
            )?;
            ratio_rows(
                &mut rows, name, sweep, spec.seed, "recent_window", "sdp_alg",
                &["worst_case_bound"],
            );
            let artifact =
                (format!("estimator-selective-n{n}.json"), solved.estimator.to_json());
            Ok((rows, artifact))
        })
        .collect();

    let mut table = ResultTable::default();
    for outcome in per_point {
        let (rows, artifact) = outcome?;
        table.rows.extend(rows);
        table.artifacts.push(artifact);
    }
    table.sort();
    Ok(table)
}

// ---------------------------------------------------------------------------
