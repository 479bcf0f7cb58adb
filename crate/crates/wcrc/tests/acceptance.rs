//! Acceptance suite: one test per criterion, each printing a pass/fail
//! line. Run `cargo test --test acceptance -- --nocapture` to see every
//! line; a failed criterion panics with the offending values.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::f64::consts::{FRAC_2_PI, FRAC_PI_2};

use nalgebra::DMatrix;
use wcrc::audit::{
    audit, build_quadratic_form, exact_worst_case, round_certificate, sdp_upper_bound,
    AuditConfig,
};
use wcrc::estimators::{mse_on_values, ObservedValues};
use wcrc::harness::{
    run_selective, run_snowball, run_table1, ExperimentKind, ExperimentSpec,
    DEFAULT_SELECTIVE_SWEEP, DEFAULT_SNOWBALL_SWEEP,
};
use wcrc::optimal::{draw_scenarios, estimate_sampled, solve_full, QueryInstance, SamplingRunConfig};
use wcrc::regression::{
    fit_known_features_with_context, fit_with_context, FitMode, LabeledData, RegressionContext,
    RegressionInstance,
};
use wcrc::samplers::{gen_importance, ImportanceConfig};
use wcrc::scenario::{Scenario, ScenarioDistribution, SparseVec};
use wcrc::sdp::{solve_linear, SchurProblem, SolverConfig};

// ---------------------------------------------------------------------------
// Shared instance generators (public-API only)
// ---------------------------------------------------------------------------

fn rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

fn random_distribution(n: usize, m: usize, rng: &mut ChaCha12Rng) -> ScenarioDistribution {
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

fn random_weights(dist: &ScenarioDistribution, scale: f64, rng: &mut ChaCha12Rng) -> Vec<SparseVec> {
    dist.scenarios()
        .iter()
        .map(|s| {
            let entries =
                s.sample().iter().map(|&j| (j, rng.random_range(-scale..=scale))).collect();
            SparseVec::new(dist.population_size(), entries).unwrap()
        })
        .collect()
}

/// Random feasible certificate matrix: PSD with diagonal capped at 1.
fn random_feasible_v(n: usize, rng: &mut ChaCha12Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let mut v = &g * g.transpose();
    let max_diag = v.diagonal().iter().fold(0.0_f64, |a, &d| a.max(d));
    v /= max_diag.max(1e-12);
    v
}

fn weighted_four_point() -> ScenarioDistribution {
    ScenarioDistribution::from_json(
        r#"{
            "n": 4,
            "scenarios": [
                {"sample": [0, 2], "target": [1, 3], "prob": 0.3},
                {"sample": [1, 3], "target": [0, 2], "prob": 0.3},
                {"sample": [2, 3], "target": [0, 1], "prob": 0.3},
                {"sample": [0, 2, 3], "target": [1], "prob": 0.05},
                {"sample": [1, 2, 3], "target": [0], "prob": 0.05}
            ]
        }"#,
    )
    .unwrap()
}

// ---------------------------------------------------------------------------
// 1. Importance-sampling table reproduction
// ---------------------------------------------------------------------------

#[test]
fn criterion_01_importance_sampling_table() {
    let mut spec = ExperimentSpec::new(ExperimentKind::Table1);
    spec.seed = 0;
    let table = run_table1(&spec).expect("table1 runs");
    let cell = |est: &str, data: &str| table.metric(50.0, est, data).expect("cell present");

    let checks = [
        ("horvitz_thompson", [0.100, 0.100, 0.100, 0.101], 0.005),
        ("subgroup", [0.018, 0.018, 0.121, 0.122], 0.01),
        ("sdp_alg", [0.051, 0.053, 0.052, 0.053], 0.01),
    ];
    let columns = ["constant", "intergroup", "intragroup", "worst_case_bound"];
    for (est, targets, tol) in checks {
        for (column, target) in columns.iter().zip(targets) {
            let got = cell(est, column);
            assert!(
                (got - target).abs() <= tol,
                "{est}/{column}: {got:.4} outside {target} +- {tol}"
            );
        }
    }
    println!("criterion 1 (importance-sampling table reproduction): PASS");
}

// ---------------------------------------------------------------------------
// 2. Weighted 4-point reference distribution
// ---------------------------------------------------------------------------

#[test]
fn criterion_02_weighted_four_point_reference() {
    let dist = weighted_four_point();
    let solved = solve_full(&dist, &SolverConfig::full_information()).expect("solve");
    let m = build_quadratic_form(solved.estimator.weights(), &dist).unwrap();
    let (exact, _) = exact_worst_case(m.matrix(), 22).unwrap();
    assert!(
        (0.6622..=0.6700).contains(&exact),
        "achieved worst case {exact} outside [0.6622, 0.6700]"
    );
    let hi = FRAC_PI_2 * 0.6652 + 0.003;
    assert!(
        solved.sdp_bound >= 0.6622 && solved.sdp_bound <= hi,
        "solve bound {} outside [0.6622, {hi}]",
        solved.sdp_bound
    );
    println!(
        "criterion 2 (4-point reference: exact {exact:.4}, bound {:.4}): PASS",
        solved.sdp_bound
    );
}

// ---------------------------------------------------------------------------
// 3. Sandwich property suite
// ---------------------------------------------------------------------------

#[test]
fn criterion_03_sandwich_suite() {
    let started = std::time::Instant::now();
    let cfg = SolverConfig { rel_tol: 1e-7, ..SolverConfig::default() };
    for i in 0..50u64 {
        let mut r = rng(3000 + i);
        let n = 2 + (i as usize % 11); // 2..=12
        let m = 1 + (i as usize % 7);
        let dist = random_distribution(n, m, &mut r);
        let weights = random_weights(&dist, 1.2, &mut r);
        let qf = build_quadratic_form(&weights, &dist).unwrap();
        let (exact, _) = exact_worst_case(qf.matrix(), 22).unwrap();
        let sol = sdp_upper_bound(&qf, &cfg).unwrap();
        let tol = 1e-6 + sol.residual;
        assert!(
            exact <= sol.objective + tol,
            "instance {i}: exact {exact} above SDP {}",
            sol.objective
        );
        assert!(
            sol.objective <= FRAC_PI_2 * exact + 1e-5,
            "instance {i}: SDP {} above (pi/2) x {exact} + 1e-5",
            sol.objective
        );
    }
    assert!(started.elapsed().as_secs() <= 120, "sandwich suite exceeded 2 minutes");
    println!("criterion 3 (sandwich on 50 instances, n <= 12): PASS");
}

// ---------------------------------------------------------------------------
// 4. Rounding ratio suite
// ---------------------------------------------------------------------------

#[test]
fn criterion_04_rounding_ratio_suite() {
    for i in 0..50u64 {
        let mut r = rng(4000 + i);
        let n = 3 + (i as usize % 6); // 3..=8
        let dist = random_distribution(n, 1 + (i as usize % 5), &mut r);
        let weights = random_weights(&dist, 1.0, &mut r);
        let qf = build_quadratic_form(&weights, &dist).unwrap();
        let sol = sdp_upper_bound(&qf, &SolverConfig::default()).unwrap();
        let rc = round_certificate(&sol.v, &qf, 4500 + i, 100_000).unwrap();
        assert!(
            rc.expectation >= FRAC_2_PI * sol.objective - 1e-6,
            "instance {i}: expectation {} below (2/pi) x {}",
            rc.expectation,
            sol.objective
        );
        let diff = (rc.sample_mean - rc.expectation).abs();
        if rc.sample_std_err > 0.0 {
            assert!(
                diff <= 3.0 * rc.sample_std_err,
                "instance {i}: MC mean {} vs closed form {} (3 SE = {})",
                rc.sample_mean,
                rc.expectation,
                3.0 * rc.sample_std_err
            );
        } else {
            assert!(diff < 1e-9, "instance {i}: degenerate rounding disagrees: {diff}");
        }
    }
    println!("criterion 4 (rounding certificates on 50 instances): PASS");
}

// ---------------------------------------------------------------------------
// 5. Full-information / sampling-access consistency
// ---------------------------------------------------------------------------

#[test]
fn criterion_05_solver_consistency() {
    for i in 0..10u64 {
        let mut r = rng(5000 + i);
        let n = 4 + (i as usize % 7); // 4..=10
        let m = 3 + (i as usize % 4);
        let pairs: Vec<(Vec<usize>, Vec<usize>)> = (0..m)
            .map(|_| {
                let sample: Vec<usize> = (0..n).filter(|_| r.random_bool(0.5)).collect();
                let mut target: Vec<usize> = (0..n).filter(|_| r.random_bool(0.4)).collect();
                if target.is_empty() {
                    target.push(r.random_range(0..n));
                }
                (sample, target)
            })
            .collect();
        let dist = ScenarioDistribution::uniform(n, &pairs).unwrap();
        let solved = solve_full(&dist, &SolverConfig::full_information()).unwrap();
        let sampled_pairs: Vec<(Vec<usize>, SparseVec)> = dist
            .scenarios()
            .iter()
            .map(|s| (s.sample().to_vec(), s.target_weights().clone()))
            .collect();
        let run = SamplingRunConfig { t: sampled_pairs.len(), eps: 1e-4, rng_seed: 0 };
        let x: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
        for (idx, s) in dist.scenarios().iter().enumerate() {
            if s.sample().is_empty() {
                continue;
            }
            let observed: Vec<(usize, f64)> = s.sample().iter().map(|&j| (j, x[j])).collect();
            let query =
                QueryInstance::new(n, s.sample(), &s.target_support(), &observed).unwrap();
            let sampled =
                estimate_sampled(&sampled_pairs, &query, &run, &SolverConfig::default()).unwrap();
            let obs = ObservedValues::new(observed).unwrap();
            let full = solved.estimator.estimate(idx, &obs).unwrap();
            assert!(
                (sampled - full).abs() <= 1e-2,
                "dist {i} scenario {idx}: sampled {sampled} vs full {full}"
            );
        }
    }
    println!("criterion 5 (full-information vs sampling-access estimates): PASS");
}

// ---------------------------------------------------------------------------
// 6. Quadratic-form / expected-error equivalence
// ---------------------------------------------------------------------------

#[test]
fn criterion_06_quadratic_form_equivalence() {
    for i in 0..20u64 {
        let mut r = rng(6000 + i);
        let n = 3 + (i as usize % 8);
        let dist = random_distribution(n, 1 + (i as usize % 6), &mut r);
        let weights = random_weights(&dist, 1.0, &mut r);
        let qf = build_quadratic_form(&weights, &dist).unwrap();
        for _ in 0..100 {
            let x: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
            let direct = qf.quadratic_form(&x).unwrap();
            let mse =
                mse_on_values(&weights, &dist, &wcrc::scenario::DataValues::new(x)).unwrap();
            assert!(
                (direct - mse).abs() <= 1e-9,
                "instance {i}: x^T M x = {direct} vs expected error {mse}"
            );
        }
    }
    println!("criterion 6 (quadratic form matches expected error): PASS");
}

// ---------------------------------------------------------------------------
// 7. Schur-objective gradient check
// ---------------------------------------------------------------------------

#[test]
fn criterion_07_schur_gradient_check() {
    let mut checked_points = 0;
    for i in 0..5u64 {
        let mut r = rng(7000 + i);
        let n = 4 + (i as usize % 5); // 4..=8
        let dist = random_distribution(n, 3 + (i as usize % 4), &mut r);
        let problem = SchurProblem::from_distribution(&dist);
        for _ in 0..2 {
            // interior feasible point: away from both the PSD boundary
            // and the diagonal cap
            let v = DMatrix::<f64>::identity(n, n) * 0.55 + random_feasible_v(n, &mut r) * 0.35;
            let eval = problem.eval(&v).unwrap();
            let h = 1e-5;
            for j in 0..n {
                for k in j..n {
                    let mut vp = v.clone();
                    let mut vm = v.clone();
                    vp[(j, k)] += h;
                    vm[(j, k)] -= h;
                    if j != k {
                        vp[(k, j)] += h;
                        vm[(k, j)] -= h;
                    }
                    let fd = (problem.objective(&vp).unwrap()
                        - problem.objective(&vm).unwrap())
                        / (2.0 * h);
                    let analytic = if j == k {
                        eval.supergradient[(j, j)]
                    } else {
                        2.0 * eval.supergradient[(j, k)]
                    };
                    let denom = fd.abs().max(analytic.abs()).max(1e-6);
                    assert!(
                        ((fd - analytic) / denom).abs() <= 1e-4,
                        "instance {i} entry ({j},{k}): fd {fd} vs analytic {analytic}"
                    );
                }
            }
            checked_points += 1;
        }
    }
    assert_eq!(checked_points, 10);
    println!("criterion 7 (analytic vs finite-difference gradients at 10 points): PASS");
}

// ---------------------------------------------------------------------------
// 8. Snowball experiment bands
// ---------------------------------------------------------------------------

#[test]
fn criterion_08_snowball_bands() {
    let started = std::time::Instant::now();
    let mut spec = ExperimentSpec::new(ExperimentKind::Snowball);
    spec.seed = 0;
    let table = run_snowball(&spec).expect("snowball runs");
    for &s in &DEFAULT_SNOWBALL_SWEEP {
        let sweep = s as f64;
        let spatial = table
            .metric(sweep, "ratio(sample_mean/sdp_alg)", "spatial")
            .expect("spatial ratio");
        let worst = table
            .metric(sweep, "ratio(sample_mean/sdp_alg)", "worst_case_bound")
            .expect("worst-case ratio");
        assert!(
            (1.5..=5.0).contains(&spatial),
            "sample size {s}: spatial ratio {spatial:.2} outside [1.5, 5]"
        );
        assert!(
            (3.0..=8.0).contains(&worst),
            "sample size {s}: worst-case ratio {worst:.2} outside [3, 8]"
        );
    }
    assert!(started.elapsed().as_secs() <= 900, "snowball experiment exceeded 15 minutes");
    println!("criterion 8 (snowball improvement bands): PASS");
}

// ---------------------------------------------------------------------------
// 9. Selective-prediction bands and scaling trend
// ---------------------------------------------------------------------------

#[test]
fn criterion_09_selective_bands() {
    let started = std::time::Instant::now();
    let mut spec = ExperimentSpec::new(ExperimentKind::Selective);
    spec.seed = 0;
    let table = run_selective(&spec).expect("selective runs");
    let mut last_baseline = f64::INFINITY;
    let mut last_solved = f64::INFINITY;
    for &n in &DEFAULT_SELECTIVE_SWEEP {
        let sweep = n as f64;
        let ratio = table
            .metric(sweep, "ratio(recent_window/sdp_alg)", "worst_case_bound")
            .expect("ratio");
        assert!(
            (1.7..=3.5).contains(&ratio),
            "n = {n}: worst-case ratio {ratio:.2} outside [1.7, 3.5]"
        );
        let baseline = table.metric(sweep, "recent_window", "worst_case_bound").unwrap();
        let solved = table.metric(sweep, "sdp_alg", "worst_case_bound").unwrap();
        assert!(
            baseline < last_baseline && solved < last_solved,
            "bounds must decrease strictly: baseline {last_baseline} -> {baseline}, solved {last_solved} -> {solved}"
        );
        last_baseline = baseline;
        last_solved = solved;
    }
    assert!(started.elapsed().as_secs() <= 600, "selective experiment exceeded 10 minutes");
    println!("criterion 9 (selective-prediction bands, decreasing trend): PASS");
}

// ---------------------------------------------------------------------------
// 10. Regression bound satisfaction
// ---------------------------------------------------------------------------

/// Brute-force least-squares oracle for d = 2, solved by Cramer's rule on
/// the target moments — independent of the library's linear algebra.
fn oracle_beta_2d(
    features: &[Vec<f64>],
    labels: &[f64],
    target: &[usize],
) -> Option<[f64; 2]> {
    let w = 1.0 / target.len() as f64;
    let (mut q00, mut q01, mut q11, mut u0, mut u1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &i in target {
        let x = &features[i];
        let y = labels[i];
        q00 += w * x[0] * x[0];
        q01 += w * x[0] * x[1];
        q11 += w * x[1] * x[1];
        u0 += w * x[0] * y;
        u1 += w * x[1] * y;
    }
    let det = q00 * q11 - q01 * q01;
    if det.abs() < 1e-12 {
        return None;
    }
    Some([(q11 * u0 - q01 * u1) / det, (q00 * u1 - q01 * u0) / det])
}

#[test]
fn criterion_10_regression_bound_satisfaction() {
    let (n, d, delta) = (20usize, 2usize, 0.2);
    let trials = 200u64;
    let solver = SolverConfig { eig_floor: 1e-6, rel_tol: 1e-5, max_iters: 8_000, rng_seed: 0 };

    let mut admissible = 0usize;
    let mut holds = 0usize;
    let mut kf_holds = 0usize;
    let mut kf_total = 0usize;
    for trial in 0..trials {
        let mut r = rng(10_000 + trial);
        // fresh near-complete-coverage draw per trial; merging duplicate
        // scenarios keeps the solve tiny without changing the distribution
        let dist = gen_importance(&ImportanceConfig {
            inclusion_probs: vec![0.9999; n],
            num_scenarios: 500,
            rng_seed: 10_000 + trial,
        })
        .unwrap()
        .merge_duplicates();
        let ctx = RegressionContext::build(&dist, &FitMode::FullInformation, &solver).unwrap();

        let beta_star: [f64; 2] = [r.random_range(-0.35..0.35), r.random_range(-0.35..0.35)];
        let features: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| if r.random::<bool>() { 1.0 } else { -1.0 }).collect())
            .collect();
        let labels: Vec<f64> = features
            .iter()
            .map(|x| {
                let mean = x[0] * beta_star[0] + x[1] * beta_star[1];
                (mean + r.random_range(-0.05..0.05)).clamp(-1.0, 1.0)
            })
            .collect();
        let data = LabeledData::new(features.clone(), labels.clone()).unwrap();
        let (sample, b) = {
            let drawn = draw_scenarios(&dist, 1, 20_000 + trial);
            (drawn[0].0.clone(), drawn[0].1.clone())
        };
        let target = b.support();
        let Some(oracle) = oracle_beta_2d(&features, &labels, &target) else {
            continue;
        };
        let inst = RegressionInstance::from_data(&data, n, &sample, &target).unwrap();

        let report = fit_with_context(&ctx, &inst, delta, Some(&data)).unwrap();
        let err = ((report.beta_hat[0] - oracle[0]).powi(2)
            + (report.beta_hat[1] - oracle[1]).powi(2))
        .sqrt();
        let bound = report.bound_value.expect("bound with eval data");
        if bound <= 0.08 {
            admissible += 1;
            if err <= bound {
                holds += 1;
            }
        }

        let kf =
            fit_known_features_with_context(&ctx, &inst, data.features(), delta, Some(&data))
                .unwrap();
        let kf_err = ((kf.beta_hat[0] - oracle[0]).powi(2)
            + (kf.beta_hat[1] - oracle[1]).powi(2))
        .sqrt();
        kf_total += 1;
        if kf_err <= kf.bound_value.expect("known-features bound") {
            kf_holds += 1;
        }
    }

    assert!(
        admissible >= 20,
        "too few admissible trials ({admissible}) for a meaningful statistic"
    );
    let rate = holds as f64 / admissible as f64;
    assert!(
        rate >= 0.75,
        "gated bound held in {holds}/{admissible} = {rate:.2} of admissible trials"
    );
    let kf_rate = kf_holds as f64 / kf_total as f64;
    assert!(
        kf_rate >= 0.75,
        "known-features bound held in {kf_holds}/{kf_total} = {kf_rate:.2}"
    );
    println!(
        "criterion 10 (regression bounds: gated {holds}/{admissible}, known-features {kf_holds}/{kf_total}): PASS"
    );
}

// ---------------------------------------------------------------------------
// 11. Schur term range
// ---------------------------------------------------------------------------

#[test]
fn criterion_11_schur_term_range() {
    let mut r = rng(11_000);
    let mut checked = 0usize;
    while checked < 1000 {
        let n = 2 + (checked % 7);
        let dist = random_distribution(n, 1 + (checked % 5), &mut r);
        let problem = SchurProblem::from_distribution(&dist);
        let v = random_feasible_v(n, &mut r);
        let eval = problem.eval(&v).unwrap();
        for &t in &eval.term_values {
            assert!(
                (-1e-9..=1.0 + 1e-9).contains(&t),
                "Schur term {t} outside [0, 1] at instance {checked}"
            );
        }
        checked += 1;
    }
    println!("criterion 11 (Schur terms within [0, 1] on 1000 feasible points): PASS");
}
