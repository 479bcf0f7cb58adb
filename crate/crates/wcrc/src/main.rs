//! `wcrc` — worst-case analysis for randomly collected data.
//!
//! Subcommands mirror the library surface: generate scenario
//! distributions, solve for near-optimal semilinear estimators, certify
//! worst-case error, answer single sampled-access queries, fit target-set
//! regressions, and drive the three built-in experiments. All file
//! formats use 0-based indices.

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use wcrc::audit::{audit, AuditConfig};
use wcrc::error::{Error, Result};
use wcrc::estimators::SemilinearEstimator;
use wcrc::harness::{run_experiment, ExperimentSpec};
use wcrc::optimal::{estimate_on_support, solve_full, QueryInstance};
use wcrc::regression::{
    fit_known_features_with_context, fit_with_context, FitMode, LabeledData, RegressionContext,
    RegressionInstance,
};
use wcrc::samplers::{gen_importance, gen_selective, gen_snowball};
use wcrc::samplers::{ImportanceConfig, SelectiveConfig, SnowballConfig};
use wcrc::scenario::{load_distribution, save_distribution};
use wcrc::sdp::SolverConfig;

#[derive(Parser)]
#[command(name = "wcrc", about = "Worst-case error analysis for randomly collected data", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Process {
    Importance,
    Snowball,
    Selective,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scenario distribution from a process config.
    Gen {
        #[arg(long, value_enum)]
        process: Process,
        /// JSON config for the chosen process.
        #[arg(long)]
        config: PathBuf,
        /// Output distribution JSON.
        #[arg(long)]
        out: PathBuf,
        /// Also write the geometric population coordinates (snowball only).
        #[arg(long)]
        points_out: Option<PathBuf>,
    },
    /// Certify the worst-case expected squared error of an estimator.
    Audit {
        #[arg(long)]
        dist: PathBuf,
        #[arg(long)]
        estimator: PathBuf,
        /// Force the exact brute-force oracle regardless of population size.
        #[arg(long)]
        exact: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve for a near-optimal semilinear estimator.
    Solve {
        #[arg(long)]
        dist: PathBuf,
        /// Output estimator JSON (weights plus certificate matrix).
        #[arg(long)]
        out: PathBuf,
        /// Also write the certified bound as JSON.
        #[arg(long)]
        bound_out: Option<PathBuf>,
    },
    /// Answer one query from sampled scenarios (sampling-access mode).
    Predict {
        /// Sampled scenarios, as a distribution JSON.
        #[arg(long)]
        samples: PathBuf,
        /// Query JSON: {"sample": [...], "target": [...], "x_A": [[i, v], ...]}.
        #[arg(long)]
        query: PathBuf,
        /// Eigenvalue floor (must be positive in this mode).
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Estimate target-set least-squares coefficients.
    Regress {
        #[arg(long)]
        dist: PathBuf,
        /// CSV with n rows: d feature columns then one label column.
        #[arg(long)]
        data: PathBuf,
        /// Query JSON; its sample/target sets are used.
        #[arg(long)]
        query: PathBuf,
        /// Compute the target covariance exactly from the data's features.
        #[arg(long)]
        known_features: bool,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a built-in experiment and write results.csv / results.json.
    Experiment {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn read(path: &PathBuf) -> Result<String> {
    Ok(std::fs::read_to_string(path)?)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { process, config, out, points_out } => {
            let text = read(&config)?;
            let dist = match process {
                Process::Importance => {
                    let cfg: ImportanceConfig = serde_json::from_str(&text)
                        .map_err(|e| Error::MalformedSchema(e.to_string()))?;
                    gen_importance(&cfg)?
                }
                Process::Snowball => {
                    let cfg: SnowballConfig = serde_json::from_str(&text)
                        .map_err(|e| Error::MalformedSchema(e.to_string()))?;
                    let (pop, dist) = gen_snowball(&cfg)?;
                    if let Some(points_path) = &points_out {
                        std::fs::write(points_path, pop.to_csv())?;
                    }
                    dist
                }
                Process::Selective => {
                    let cfg: SelectiveConfig = serde_json::from_str(&text)
                        .map_err(|e| Error::MalformedSchema(e.to_string()))?;
                    gen_selective(&cfg)?
                }
            };
            save_distribution(&dist, &out)?;
            eprintln!(
                "wrote {} scenarios over n = {} to {}",
                dist.len(),
                dist.population_size(),
                out.display()
            );
            Ok(())
        }
        Command::Audit { dist, estimator, exact, out } => {
            let dist = load_distribution(&dist)?;
            let est = SemilinearEstimator::from_json(&read(&estimator)?, &dist)?;
            let mut cfg = AuditConfig::default();
            if exact {
                // enumeration doubles per index; refuse hopeless requests
                if dist.population_size() > 30 {
                    return Err(Error::InvalidConfig(format!(
                        "--exact enumerates 2^(n-1) sign vectors; n = {} is too large (max 30)",
                        dist.population_size()
                    )));
                }
                cfg.exact_threshold = dist.population_size();
            }
            let report = audit(&est, &dist, &cfg)?;
            std::fs::write(&out, report.to_json())?;
            eprintln!(
                "sdp_upper = {:.6}, rounding_lower = {:.6}, exact = {:?}",
                report.sdp_upper, report.rounding_lower, report.exact_value
            );
            Ok(())
        }
        Command::Solve { dist, out, bound_out } => {
            let dist = load_distribution(&dist)?;
            let solved = solve_full(&dist, &SolverConfig::full_information())?;
            solved.estimator.save(&out)?;
            if let Some(bound_path) = bound_out {
                let payload = serde_json::json!({
                    "sdp_bound": solved.sdp_bound,
                    "residual": solved.residual,
                });
                std::fs::write(bound_path, serde_json::to_string_pretty(&payload)?)?;
            }
            eprintln!("sdp_bound = {:.6} (residual {:.2e})", solved.sdp_bound, solved.residual);
            Ok(())
        }
        Command::Predict { samples, query, eps, seed } => {
            let dist = load_distribution(&samples)?;
            let query = QueryInstance::from_json(&read(&query)?, dist.population_size())?;
            let solver = SolverConfig { rng_seed: seed, ..SolverConfig::default() };
            let estimate = estimate_on_support(&dist, &query, eps, &solver)?;
            println!("{}", serde_json::json!({ "estimate": estimate }));
            Ok(())
        }
        Command::Regress { dist, data, query, known_features, delta, out } => {
            let dist = load_distribution(&dist)?;
            let n = dist.population_size();
            let data = LabeledData::parse_csv(&read(&data)?)?;
            let query: wcrc::optimal::QueryJson = serde_json::from_str(&read(&query)?)
                .map_err(|e| Error::MalformedSchema(e.to_string()))?;
            let inst = RegressionInstance::from_data(&data, n, &query.sample, &query.target)?;
            let ctx = RegressionContext::build(
                &dist,
                &FitMode::FullInformation,
                &SolverConfig::full_information(),
            )?;
            let report = if known_features {
                fit_known_features_with_context(&ctx, &inst, data.features(), delta, Some(&data))?
            } else {
                fit_with_context(&ctx, &inst, delta, Some(&data))?
            };
            std::fs::write(&out, report.to_json())?;
            eprintln!("beta_hat = {:?}", report.beta_hat);
            Ok(())
        }
        Command::Experiment { spec, out_dir } => {
            let spec = ExperimentSpec::from_json(&read(&spec)?)?;
            let table = run_experiment(&spec)?;
            table.write(&out_dir)?;
            eprintln!(
                "wrote {} result rows and {} artifacts to {}",
                table.rows.len(),
                table.artifacts.len(),
                out_dir.display()
            );
            Ok(())
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
