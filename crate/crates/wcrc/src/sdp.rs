//! The shared concave-maximization backend.
//!
//! Two problem families live here, both over the feasible set
//! `{V : V ⪰ εI, diag(V) ≤ 1}`:
//!
//! * [`solve_linear`] maximizes `⟨M, V⟩` for symmetric PSD `M` — the
//!   semidefinite relaxation of `max_{x ∈ {±1}^n} x^T M x`. For PSD `M`
//!   an optimum always has unit diagonal, so the solver works on the
//!   unit-diagonal slice with a Burer–Monteiro factorization `V = R R^T`
//!   and row-normalizing block-coordinate updates, and certifies the value
//!   against the dual `min {Σ λ_j : diag(λ) ⪰ M}`.
//!
//! * [`solve_schur`] maximizes the concave objective
//!   `Σ_i prob_i · b_i^T (V - V_{A_i}^T V_{A_iA_i}^{-1} V_{A_i}) b_i`.
//!   Each term equals `min_a (a - b_i)^T V (a - b_i)` over vectors
//!   supported on `A_i`, so the objective is a pointwise minimum of linear
//!   functions of `V`: concave, monotone in the PSD order (hence an
//!   optimum with unit diagonal exists), with supergradient
//!   `Σ_i prob_i (a_i - b_i)(a_i - b_i)^T` at the minimizing weights. The
//!   solver runs L-BFGS over a row-normalized factorization and certifies
//!   optimality by the linearization gap
//!   `max_V ⟨M(V̂), V⟩ - objective(V̂) ≥ opt - objective(V̂)`,
//!   evaluating the left maximum with the certified linear solver.
//!
//! Solves are single-threaded and deterministic given (inputs, seed):
//! the initial point is always `V = I`, and randomized restarts are taken
//! only after a failed residual check, from a seeded stream.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::scenario::{ScenarioDistribution, SparseVec};

// ---------------------------------------------------------------------------
// Configuration and solutions
// ---------------------------------------------------------------------------

/// Knobs shared by both solver entry points.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Minimum-eigenvalue constraint `V ⪰ εI`.
    #[serde(default)]
    pub eig_floor: f64,
    /// Certified relative optimality tolerance.
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    /// Total inner-iteration budget (sweeps or L-BFGS steps).
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// Seed for randomized restarts; the first attempt is deterministic.
    #[serde(default)]
    pub rng_seed: u64,
}

fn default_rel_tol() -> f64 {
    1e-6
}

fn default_max_iters() -> usize {
    60_000
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eig_floor: 0.0,
            rel_tol: default_rel_tol(),
            max_iters: default_max_iters(),
            rng_seed: 0,
        }
    }
}

impl SolverConfig {
    /// Default configuration for the full-information estimator solve:
    /// a tiny eigenvalue floor as numerical regularization only.
    pub fn full_information() -> Self {
        Self { eig_floor: 1e-6, ..Self::default() }
    }

    pub fn with_floor(mut self, eig_floor: f64) -> Self {
        self.eig_floor = eig_floor;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.eig_floor >= 0.0 && self.eig_floor < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "eig_floor {} outside [0, 1)",
                self.eig_floor
            )));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidConfig("rel_tol must be positive".into()));
        }
        Ok(())
    }

    fn gap_target(&self, objective: f64) -> f64 {
        self.rel_tol * objective.abs().max(1.0)
    }
}

/// A feasible matrix with its objective value and a certified residual.
///
/// `residual` bounds the distance to the true optimum from above
/// (duality or linearization gap plus any feasibility slack), so
/// `objective ≤ opt ≤ objective + residual`.
#[derive(Debug, Clone)]
pub struct SpectralSolution {
    pub v: DMatrix<f64>,
    pub objective: f64,
    pub residual: f64,
    pub iterations: usize,
}

// ---------------------------------------------------------------------------
// Linear objective: max <M, V> over {V ⪰ εI, diag(V) ≤ 1}
// ---------------------------------------------------------------------------

struct MixingOutcome {
    r: DMatrix<f64>,
    primal: f64,
    dual: f64,
    sweeps: usize,
}

/// Block-coordinate ascent on `V = R R^T` with unit rows: row `j` moves to
/// the normalized gradient `Σ_k M_jk r_k`. Tracks the best primal iterate
/// and the best (smallest) dual bound `Σ λ_j + n·max(0, -λ_min(diag λ - M))`.
fn mixing_solve(m: &DMatrix<f64>, rel_tol: f64, max_sweeps: usize, seed: u64) -> MixingOutcome {
    let n = m.nrows();
    let mut r = DMatrix::<f64>::identity(n, n);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);

    let primal_of = |r: &DMatrix<f64>| -> f64 {
        let g = m * r;
        (r.transpose() * &g).trace()
    };

    let mut best_r = r.clone();
    let mut best_primal = primal_of(&r);
    let mut best_dual = f64::INFINITY;
    let mut stalled = 0usize;
    let mut sweeps = 0usize;

    for sweep in 0..max_sweeps {
        sweeps = sweep + 1;
        for j in 0..n {
            let mut g = DVector::<f64>::zeros(n);
            for k in 0..n {
                let c = m[(j, k)];
                if c != 0.0 {
                    g.axpy(c, &r.row(k).transpose(), 1.0);
                }
            }
            let norm = g.norm();
            if norm > 1e-300 {
                g.unscale_mut(norm);
                r.row_mut(j).copy_from(&g.transpose());
            }
        }

        // primal value and dual certificate at the current point
        let grad = m * &r;
        let primal = (r.transpose() * &grad).trace();
        let lambda: Vec<f64> = (0..n).map(|j| grad.row(j).norm()).collect();
        let mut dual_mat = -m.clone();
        for j in 0..n {
            dual_mat[(j, j)] += lambda[j];
        }
        let min_ev = linalg::min_eigenvalue(&dual_mat);
        let dual = lambda.iter().sum::<f64>() + n as f64 * (-min_ev).max(0.0);

        let improved = primal > best_primal + 1e-15 * best_primal.abs().max(1.0);
        if primal > best_primal {
            best_primal = primal;
            best_r.copy_from(&r);
        }
        best_dual = best_dual.min(dual);

        if best_dual - best_primal <= rel_tol * best_primal.abs().max(1.0) {
            break;
        }
        stalled = if improved { 0 } else { stalled + 1 };
        if stalled >= 40 {
            // escape a stalled configuration with a small seeded rotation
            for j in 0..n {
                let mut row: DVector<f64> = r.row(j).transpose();
                for v in row.iter_mut() {
                    *v += rng.random_range(-0.05..0.05);
                }
                let norm = row.norm();
                if norm > 1e-300 {
                    row.unscale_mut(norm);
                }
                r.row_mut(j).copy_from(&row.transpose());
            }
            stalled = 0;
        }
    }

    MixingOutcome { r: best_r, primal: best_primal, dual: best_dual, sweeps }
}

/// Maximize `⟨M, V⟩` over `{V ⪰ εI, diag(V) ≤ 1}` for symmetric PSD `M`,
/// certified by a dual bound: on success the returned objective is within
/// `rel_tol · max(1, |objective|)` of the true optimum.
///
/// The eigenvalue floor enters through the exact affine substitution
/// `V = εI + (1-ε)W` with `W ⪰ 0, diag(W) ≤ 1`, under which the optimum
/// maps as `opt_ε = ε·tr(M) + (1-ε)·opt_0`.
pub fn solve_linear(m: &DMatrix<f64>, cfg: &SolverConfig) -> Result<SpectralSolution> {
    cfg.validate()?;
    let (primal, v, residual, iterations) = solve_linear_inner(m, cfg)?;
    if residual > cfg.gap_target(primal) {
        return Err(Error::SolverNonConvergence { residual, iterations });
    }
    Ok(SpectralSolution { v, objective: primal, residual, iterations })
}

fn solve_linear_inner(
    m: &DMatrix<f64>,
    cfg: &SolverConfig,
) -> Result<(f64, DMatrix<f64>, f64, usize)> {
    let n = m.nrows();
    if n == 0 || m.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n.max(1), got: m.ncols() });
    }
    let asym = linalg::asymmetry(m);
    if asym > 1e-10 * m.amax().max(1.0) {
        return Err(Error::MatrixInvariant {
            property: "symmetry",
            detail: format!("asymmetry {asym}"),
        });
    }
    let eps = cfg.eig_floor;
    let out = mixing_solve(m, cfg.rel_tol * 0.5, cfg.max_iters, cfg.rng_seed);
    let w = &out.r * out.r.transpose();
    let v = DMatrix::<f64>::identity(n, n) * eps + &w * (1.0 - eps);
    let primal = eps * m.trace() + (1.0 - eps) * out.primal;
    let residual = ((out.dual - out.primal) * (1.0 - eps)).max(0.0);
    Ok((primal, v, residual, out.sweeps))
}

// ---------------------------------------------------------------------------
// Schur objective
// ---------------------------------------------------------------------------

/// Weights solving `min_a (a - b)^T V (a - b)` over vectors supported on
/// `sample`: on the sample coordinates, `V_{AA}^{-1} V_A b` (pseudoinverse
/// when singular), zero elsewhere. This also makes `V(a - b)` vanish on
/// the sample coordinates.
pub fn extract_weights(v: &DMatrix<f64>, sample: &[usize], b: &SparseVec) -> Result<SparseVec> {
    let n = v.nrows();
    if b.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.dim() });
    }
    if sample.is_empty() {
        return Ok(SparseVec::zeros(n));
    }
    if let Some(&j) = sample.iter().find(|&&j| j >= n) {
        return Err(Error::IndexOutOfRange { index: j, n });
    }
    let vss = linalg::gather(v, sample);
    let rhs = DVector::from_fn(sample.len(), |i, _| {
        b.entries().iter().map(|&(j, w)| v[(sample[i], j)] * w).sum()
    });
    let a = linalg::solve_psd(&vss, &rhs);
    SparseVec::new(n, sample.iter().copied().zip(a.iter().copied()).collect())
}

/// The probability-weighted list of (sample, target-weights) terms whose
/// Schur objective the solver maximizes.
#[derive(Debug, Clone)]
pub struct SchurProblem {
    n: usize,
    terms: Vec<(Vec<usize>, SparseVec, f64)>,
}

/// Objective value, per-term values, minimizing weights, and supergradient
/// at one feasible `V`.
#[derive(Debug, Clone)]
pub struct SchurEval {
    pub objective: f64,
    pub term_values: Vec<f64>,
    pub weights: Vec<SparseVec>,
    pub supergradient: DMatrix<f64>,
}

impl SchurProblem {
    pub fn from_distribution(dist: &ScenarioDistribution) -> Self {
        Self {
            n: dist.population_size(),
            terms: dist
                .scenarios()
                .iter()
                .map(|s| (s.sample().to_vec(), s.target_weights().clone(), s.probability()))
                .collect(),
        }
    }

    /// Uniformly weighted terms, e.g. a list of scenario samples drawn
    /// from a distribution.
    pub fn from_pairs(n: usize, pairs: &[(Vec<usize>, SparseVec)]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        let w = 1.0 / pairs.len() as f64;
        for (sample, b) in pairs {
            if b.dim() != n {
                return Err(Error::DimensionMismatch { expected: n, got: b.dim() });
            }
            if let Some(&j) = sample.iter().find(|&&j| j >= n) {
                return Err(Error::IndexOutOfRange { index: j, n });
            }
        }
        Ok(Self {
            n,
            terms: pairs.iter().map(|(a, b)| (a.clone(), b.clone(), w)).collect(),
        })
    }

    pub fn population_size(&self) -> usize {
        self.n
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn total_weight(&self) -> f64 {
        self.terms.iter().map(|t| t.2).sum()
    }

    /// Objective only (no gradient assembly).
    pub fn objective(&self, v: &DMatrix<f64>) -> Result<f64> {
        Ok(self.eval_inner(v, false)?.objective)
    }

    /// Objective, per-term values, minimizing weights, and supergradient.
    pub fn eval(&self, v: &DMatrix<f64>) -> Result<SchurEval> {
        self.eval_inner(v, true)
    }

    /// `Σ_i prob_i (a_i - b_i)(a_i - b_i)^T` for externally supplied
    /// weights.
    pub fn weights_quadratic_form(&self, weights: &[SparseVec]) -> Result<DMatrix<f64>> {
        if weights.len() != self.terms.len() {
            return Err(Error::DimensionMismatch {
                expected: self.terms.len(),
                got: weights.len(),
            });
        }
        let n = self.n;
        let mut m = DMatrix::<f64>::zeros(n, n);
        let mut diff = DVector::<f64>::zeros(n);
        for ((_, b, prob), a) in self.terms.iter().zip(weights) {
            diff.fill(0.0);
            for &(j, w) in a.entries() {
                diff[j] += w;
            }
            for &(j, w) in b.entries() {
                diff[j] -= w;
            }
            m.ger(*prob, &diff, &diff, 1.0);
        }
        Ok(m)
    }

    /// Weights from a ridge-regularized extraction
    /// `(V_{AA} + ridge·I)^{-1} V_A b` per term. Any supported weights give
    /// a valid minimax upper bound; the ridge tames the extraction when
    /// `V_{AA}` is barely above the floor.
    fn ridge_weights(&self, v: &DMatrix<f64>, ridge: f64) -> Result<Vec<SparseVec>> {
        self.terms
            .iter()
            .map(|(sample, b, _)| {
                if sample.is_empty() {
                    return Ok(SparseVec::zeros(self.n));
                }
                let mut vss = linalg::gather(v, sample);
                for i in 0..sample.len() {
                    vss[(i, i)] += ridge;
                }
                let rhs = DVector::from_fn(sample.len(), |i, _| {
                    b.entries().iter().map(|&(j, w)| v[(sample[i], j)] * w).sum()
                });
                let a = linalg::solve_psd(&vss, &rhs);
                SparseVec::new(self.n, sample.iter().copied().zip(a.iter().copied()).collect())
            })
            .collect()
    }

    fn eval_inner(&self, v: &DMatrix<f64>, with_gradient: bool) -> Result<SchurEval> {
        let n = self.n;
        if v.nrows() != n || v.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: v.nrows() });
        }
        let mut objective = 0.0;
        let mut term_values = Vec::with_capacity(self.terms.len());
        let mut weights = Vec::with_capacity(self.terms.len());
        let mut grad = DMatrix::<f64>::zeros(if with_gradient { n } else { 0 }, if with_gradient { n } else { 0 });
        let mut diff = DVector::<f64>::zeros(n);

        for (sample, b, prob) in &self.terms {
            // t_full = b^T V b
            let mut t_full = 0.0;
            for &(j, wj) in b.entries() {
                for &(k, wk) in b.entries() {
                    t_full += wj * wk * v[(j, k)];
                }
            }
            let (value, a) = if sample.is_empty() {
                (t_full, SparseVec::zeros(n))
            } else {
                let vss = linalg::gather(v, sample);
                let rhs = DVector::from_fn(sample.len(), |i, _| {
                    b.entries().iter().map(|&(j, w)| v[(sample[i], j)] * w).sum()
                });
                let a = linalg::solve_psd(&vss, &rhs);
                let reduction = rhs.dot(&a);
                let value = t_full - reduction;
                (
                    value,
                    SparseVec::new(n, sample.iter().copied().zip(a.iter().copied()).collect())?,
                )
            };
            objective += prob * value;
            term_values.push(value);
            if with_gradient {
                diff.fill(0.0);
                for &(j, w) in a.entries() {
                    diff[j] += w;
                }
                for &(j, w) in b.entries() {
                    diff[j] -= w;
                }
                grad.ger(*prob, &diff, &diff, 1.0);
            }
            weights.push(a);
        }
        Ok(SchurEval { objective, term_values, weights, supergradient: grad })
    }
}

// ---------------------------------------------------------------------------
// Schur solve: L-BFGS over a row-normalized factorization
// ---------------------------------------------------------------------------

/// `V(U) = εI + R R^T` where row `j` of `R` is `sqrt(1-ε) · u_j / ‖u_j‖`.
/// Unit diagonal is without loss: each Schur term is monotone
/// nondecreasing in the PSD order, so pushing diagonal entries to 1 never
/// decreases the objective.
struct SphereParam {
    n: usize,
    eps: f64,
    scale: f64,
}

impl SphereParam {
    fn new(n: usize, eps: f64) -> Self {
        Self { n, eps, scale: (1.0 - eps).sqrt() }
    }

    /// Rows normalized to `sqrt(1-ε)`.
    fn factor(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        let mut r = u.clone();
        for j in 0..self.n {
            let norm = r.row(j).norm();
            if norm > 1e-300 {
                let s = self.scale / norm;
                r.row_mut(j).scale_mut(s);
            } else {
                r.row_mut(j).fill(0.0);
                r[(j, j)] = self.scale;
            }
        }
        r
    }

    fn v_of(&self, r: &DMatrix<f64>) -> DMatrix<f64> {
        let mut v = r * r.transpose();
        for j in 0..self.n {
            v[(j, j)] += self.eps;
        }
        v
    }

    /// Chain rule from `dF/dV = g_v` through the normalized factorization.
    fn grad_u(&self, u: &DMatrix<f64>, r: &DMatrix<f64>, g_v: &DMatrix<f64>) -> DMatrix<f64> {
        let g_r = g_v * r * 2.0;
        let mut g_u = DMatrix::<f64>::zeros(self.n, u.ncols());
        for j in 0..self.n {
            let norm = u.row(j).norm();
            if norm <= 1e-300 {
                continue;
            }
            let uhat = u.row(j) / norm;
            let gr = g_r.row(j);
            let radial = gr.dot(&uhat);
            let tangent = gr - uhat * radial;
            g_u.row_mut(j).copy_from(&(tangent * (self.scale / norm)));
        }
        g_u
    }
}

/// Maximize the probability-weighted Schur objective over
/// `{V ⪰ εI, diag(V) ≤ 1}`. On success the returned objective is within
/// `rel_tol · max(1, |objective|)` of the optimum, certified by the
/// linearization gap at the supergradient.
///
/// Each round runs L-BFGS on the factorized iterate, then alternates
/// certificate solves with Frank–Wolfe steps: the linear maximizer of the
/// supergradient is both the gap certificate and an ascent direction, and
/// a one-dimensional concave line search along it polishes the iterate
/// when the factorized landscape stalls.
pub fn solve_schur(problem: &SchurProblem, cfg: &SolverConfig) -> Result<SpectralSolution> {
    cfg.validate()?;
    if problem.terms.is_empty() {
        return Err(Error::EmptyDistribution);
    }
    let n = problem.n;
    // With a zero floor the objective is nonsmooth at low-rank optima and
    // the supergradient linearization cannot always certify. Solve with a
    // tiny internal floor instead: restricting eigenvalues to δ costs at
    // most δ·Σ prob (each term is in [0, 1] and the objective is concave),
    // which goes into the reported residual.
    let total_weight = problem.total_weight();
    let (eps, floor_slack) = if cfg.eig_floor > 0.0 {
        (cfg.eig_floor, 0.0)
    } else {
        let delta = (0.05 * cfg.rel_tol / total_weight.max(1.0)).min(1e-7);
        (delta, delta * total_weight)
    };
    let param = SphereParam::new(n, eps);
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.rng_seed);

    let lin_cfg = SolverConfig {
        eig_floor: eps,
        rel_tol: (cfg.rel_tol * 0.25).min(1e-7),
        max_iters: 3_000,
        rng_seed: cfg.rng_seed ^ 0x5eed,
    };

    let mut u = DMatrix::<f64>::identity(n, n);
    let mut total_iters = 0usize;
    let mut best: Option<(f64, DMatrix<f64>, f64)> = None; // (objective, v, residual)

    let max_attempts = 8usize;
    for attempt in 0..max_attempts {
        if total_iters >= cfg.max_iters {
            break;
        }
        let budget = (cfg.max_iters - total_iters).min(1_500);
        let (u_out, iters) = lbfgs_maximize(problem, &param, u.clone(), budget)?;
        total_iters += iters;
        u = u_out;

        let r = param.factor(&u);
        let mut v = param.v_of(&r);
        let mut eval = problem.eval(&v)?;
        let before = best.as_ref().map(|(obj, _, _)| *obj);

        // Certificate / polish loop. By the minimax saddle, any weights a
        // give the valid upper bound max_V <M(a), V> on the optimum, so
        // each round tightens the running minimum of those bounds and takes
        // a Frank-Wolfe step on the primal side; the weights extracted
        // along the line-search path are the candidate a's of a
        // best-response alternation.
        let mut upper = f64::INFINITY;
        let cand_upper = |m: &DMatrix<f64>| -> f64 {
            match solve_linear_inner(m, &lin_cfg) {
                Ok((lin_obj, _, lin_res, _)) => lin_obj + lin_res,
                Err(_) => f64::INFINITY,
            }
        };
        for round in 0..12 {
            let Ok((lin_obj, v_star, lin_res, _)) =
                solve_linear_inner(&eval.supergradient, &lin_cfg)
            else {
                break;
            };
            let upper_prev = upper;
            upper = upper.min(lin_obj + lin_res);
            if round == 0 {
                // ridge-regularized extractions as extra minimax candidates
                for ridge in [eps.max(1e-9), 1e-5, 1e-3] {
                    let weights = problem.ridge_weights(&v, ridge)?;
                    let m = problem.weights_quadratic_form(&weights)?;
                    upper = upper.min(cand_upper(&m));
                }
            }

            match best.as_mut() {
                Some(b) if eval.objective > b.0 => {
                    *b = (eval.objective, v.clone(), f64::INFINITY);
                }
                None => best = Some((eval.objective, v.clone(), f64::INFINITY)),
                _ => {}
            }
            let b = best.as_mut().expect("best is set");
            b.2 = b.2.min((upper - b.0).max(0.0) + floor_slack);
            if b.2 <= cfg.gap_target(b.0) || total_iters >= cfg.max_iters {
                break;
            }

            // ternary line search on the concave section gamma -> F((1-g)V + gV*)
            let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
            for _ in 0..28 {
                let g1 = lo + (hi - lo) / 3.0;
                let g2 = hi - (hi - lo) / 3.0;
                let f1 = problem.objective(&section(&v, &v_star, g1))?;
                let f2 = problem.objective(&section(&v, &v_star, g2))?;
                if f1 < f2 {
                    lo = g1;
                } else {
                    hi = g2;
                }
            }
            total_iters += 8;
            let v_next = section(&v, &v_star, 0.5 * (lo + hi));
            let eval_next = problem.eval(&v_next)?;
            let scale = eval.objective.abs().max(1.0);
            let primal_stalled = eval_next.objective <= eval.objective + 1e-15 * scale;
            let upper_stalled = upper >= upper_prev - 1e-15 * scale;
            v = v_next;
            eval = eval_next;
            if primal_stalled && upper_stalled {
                break;
            }
        }

        // When the primal-side certificate stalls, polish the upper bound
        // on the estimator side: L(a) = max_V <M(a), V> is convex in the
        // weights with benign curvature, each value is a valid bound, and
        // damped best-response steps (blend toward the extraction at the
        // maximizer) drive it to the saddle value.
        {
            let b = best.as_mut().expect("an iterate exists");
            if b.2 > cfg.gap_target(b.0) {
                let mut weights = problem.eval(&b.1)?.weights;
                for round in 0..30 {
                    let m = problem.weights_quadratic_form(&weights)?;
                    let Ok((lin_obj, v_round, lin_res, _)) = solve_linear_inner(&m, &lin_cfg)
                    else {
                        break;
                    };
                    upper = upper.min(lin_obj + lin_res);
                    b.2 = b.2.min((upper - b.0).max(0.0) + floor_slack);
                    if b.2 <= cfg.gap_target(b.0) {
                        break;
                    }
                    let response = problem.eval(&v_round)?.weights;
                    let beta = 2.0 / (round as f64 + 3.0);
                    for (a, r) in weights.iter_mut().zip(&response) {
                        let blended: Vec<(usize, f64)> = a
                            .entries()
                            .iter()
                            .zip(r.entries())
                            .map(|(&(j, wa), &(k, wr))| {
                                debug_assert_eq!(j, k);
                                (j, (1.0 - beta) * wa + beta * wr)
                            })
                            .collect();
                        *a = SparseVec::new(n, blended)?;
                    }
                    total_iters += 1;
                }
            }
        }

        let (best_obj, _, best_res) = best.as_ref().unwrap();
        if *best_res <= cfg.gap_target(*best_obj) {
            let (objective, v, residual) = best.unwrap();
            return Ok(SpectralSolution { v, objective, residual, iterations: total_iters });
        }

        // restart from the best iterate's factor; kick only when the
        // attempt made no progress
        let (best_obj, best_v, _) = best.as_ref().unwrap();
        let mut w = best_v.clone();
        for j in 0..n {
            w[(j, j)] = (w[(j, j)] - eps).max(0.0);
        }
        if let Ok(cols) = linalg::gram_columns(&w, 1e-6) {
            u = cols.transpose();
        }
        let stuck = before.is_some_and(|b| *best_obj <= b + cfg.gap_target(*best_obj) * 0.01);
        if stuck {
            let kick = 0.1 / (attempt + 1) as f64;
            for x in u.iter_mut() {
                *x += rng.random_range(-kick..kick);
            }
        }
    }

    let residual = best.map(|(_, _, r)| r).unwrap_or(f64::INFINITY);
    Err(Error::SolverNonConvergence { residual, iterations: total_iters })
}

/// `(1-gamma) a + gamma b`.
fn section(a: &DMatrix<f64>, b: &DMatrix<f64>, gamma: f64) -> DMatrix<f64> {
    a * (1.0 - gamma) + b * gamma
}

/// Plain L-BFGS (two-loop recursion, Armijo backtracking) maximizing the
/// Schur objective through the sphere parameterization. Returns the final
/// point and iterations used.
fn lbfgs_maximize(
    problem: &SchurProblem,
    param: &SphereParam,
    mut u: DMatrix<f64>,
    budget: usize,
) -> Result<(DMatrix<f64>, usize)> {
    const MEMORY: usize = 10;
    let n = param.n;
    let k = u.ncols();

    let eval_at = |u: &DMatrix<f64>| -> Result<(f64, DMatrix<f64>)> {
        let r = param.factor(u);
        let v = param.v_of(&r);
        let e = problem.eval(&v)?;
        Ok((e.objective, param.grad_u(u, &r, &e.supergradient)))
    };

    let flat = |m: &DMatrix<f64>| DVector::from_column_slice(m.as_slice());
    let unflat = |v: &DVector<f64>| DMatrix::from_column_slice(n, k, v.as_slice());

    let (mut f, g0) = eval_at(&u)?;
    let mut g = flat(&g0);
    let mut history: Vec<(DVector<f64>, DVector<f64>, f64)> = Vec::new();
    let mut iters = 0usize;
    let mut stall = 0usize;

    while iters < budget {
        iters += 1;

        // two-loop recursion on the ascent direction
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * s.dot(&q);
            q.axpy(-a, y, 1.0);
            alphas.push(a);
        }
        if let Some((s, y, _)) = history.last() {
            let scale = s.dot(y) / y.dot(y).max(1e-300);
            q.scale_mut(scale.max(1e-12));
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
            let b = rho * y.dot(&q);
            q.axpy(a - b, s, 1.0);
        }
        let mut d = q;
        if d.dot(&g) <= 0.0 {
            d = g.clone();
            history.clear();
        }

        // Armijo backtracking on the ascent step
        let g_dot_d = g.dot(&d);
        let mut step = if history.is_empty() { 1.0 / d.norm().max(1e-12) } else { 1.0 };
        let mut accepted = None;
        for _ in 0..40 {
            let u_new = unflat(&(flat(&u) + &d * step));
            let (f_new, g_new) = eval_at(&u_new)?;
            if f_new >= f + 1e-4 * step * g_dot_d {
                accepted = Some((u_new, f_new, g_new, step));
                break;
            }
            step *= 0.5;
        }
        let Some((u_new, f_new, g_new_mat, step)) = accepted else {
            break; // no ascent possible along d at any step size
        };

        let s = &d * step;
        let g_new = flat(&g_new_mat);
        let y = &g - &g_new; // gradient of -F increases along s
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if history.len() == MEMORY {
                history.remove(0);
            }
            history.push((s, y, 1.0 / sy));
        }

        let improved = f_new - f;
        u = u_new;
        g = g_new;
        f = f_new;

        if improved <= 1e-14 * f.abs().max(1.0) {
            stall += 1;
            if stall >= 8 {
                break;
            }
        } else {
            stall = 0;
        }
        if g.norm() <= 1e-12 * f.abs().max(1.0) {
            break;
        }

        // keep row norms well-scaled; the factor is norm-invariant
        let drifted = (0..n).any(|j| {
            let norm = u.row(j).norm();
            !(0.25..=4.0).contains(&norm)
        });
        if drifted {
            for j in 0..n {
                let norm = u.row(j).norm();
                if norm > 1e-300 {
                    let inv = 1.0 / norm;
                    u.row_mut(j).scale_mut(inv);
                }
            }
            let (f2, g2) = eval_at(&u)?;
            f = f2;
            g = flat(&g2);
            history.clear();
        }
    }
    Ok((u, iters))
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audit::exact_worst_case;
    use crate::scenario::Scenario;
    use crate::testutil;

    fn feasibility_ok(v: &DMatrix<f64>, eps: f64) {
        let min_ev = linalg::min_eigenvalue(v);
        assert!(min_ev >= eps - 1e-8, "min eigenvalue {min_ev} below floor {eps}");
        for d in v.diagonal().iter() {
            assert!(*d <= 1.0 + 1e-8, "diagonal entry {d} above 1");
        }
    }

    #[test]
    fn linear_identity_objective_is_n() {
        for n in [1usize, 3, 8] {
            let m = DMatrix::<f64>::identity(n, n);
            let sol = solve_linear(&m, &SolverConfig::default()).unwrap();
            assert!((sol.objective - n as f64).abs() < 1e-8);
            feasibility_ok(&sol.v, 0.0);
        }
    }

    #[test]
    fn linear_rank_one_matches_exact_oracle() {
        let c = DVector::from_vec(vec![1.0, 1.0]);
        let m = &c * c.transpose();
        let sol = solve_linear(&m, &SolverConfig::default()).unwrap();
        let (exact, _) = exact_worst_case(&m, 22).unwrap();
        assert!((exact - 4.0).abs() < 1e-12);
        // contract tolerance: rel_tol * max(1, |objective|)
        assert!((sol.objective - 4.0).abs() < 1e-5, "objective {}", sol.objective);
    }

    #[test]
    fn linear_floor_is_inactive_for_identity() {
        let m = DMatrix::<f64>::identity(2, 2);
        let cfg = SolverConfig::default().with_floor(0.5);
        let sol = solve_linear(&m, &cfg).unwrap();
        assert!((sol.objective - 2.0).abs() < 1e-8);
        feasibility_ok(&sol.v, 0.5);
    }

    #[test]
    fn linear_zero_matrix() {
        let m = DMatrix::<f64>::zeros(3, 3);
        let sol = solve_linear(&m, &SolverConfig::default()).unwrap();
        assert!(sol.objective.abs() < 1e-12);
        assert!(sol.residual < 1e-9);
    }

    #[test]
    fn linear_respects_exact_oracle_on_random_psd() {
        let mut rng = testutil::rng(77);
        for trial in 0..10 {
            use rand::Rng;
            let n = 4 + trial % 3;
            let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let m = &g * g.transpose();
            let sol = solve_linear(&m, &SolverConfig::default()).unwrap();
            let (exact, _) = exact_worst_case(&m, 22).unwrap();
            let tol = 1e-6 + sol.residual;
            assert!(exact <= sol.objective + tol, "exact {exact} > sdp {}", sol.objective);
            assert!(
                sol.objective <= std::f64::consts::FRAC_PI_2 * exact + tol,
                "sdp {} above pi/2 * {exact}",
                sol.objective
            );
        }
    }

    fn schur_of(dist: &ScenarioDistribution) -> SchurProblem {
        SchurProblem::from_distribution(dist)
    }

    #[test]
    fn schur_full_observation_is_zero() {
        let dist = ScenarioDistribution::uniform(
            4,
            &[(vec![0, 1, 2, 3], vec![1, 2]), (vec![0, 1, 3], vec![0, 3])],
        )
        .unwrap();
        let sol = solve_schur(&schur_of(&dist), &SolverConfig::full_information()).unwrap();
        assert!(sol.objective.abs() < 1e-8, "objective {}", sol.objective);
        let eval = schur_of(&dist).eval(&sol.v).unwrap();
        for (s, a) in dist.scenarios().iter().zip(&eval.weights) {
            let b = s.target_weights();
            for &(j, w) in b.entries() {
                assert!((a.get(j) - w).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn schur_nothing_observed_single_index() {
        let s = Scenario::new(1, &[], &[0], 1.0).unwrap();
        let dist = ScenarioDistribution::new(1, vec![s]).unwrap();
        let sol = solve_schur(&schur_of(&dist), &SolverConfig::default()).unwrap();
        assert!((sol.objective - 1.0).abs() < 1e-9);
        assert!((sol.v[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn schur_weighted_four_point_reference_value() {
        let dist = testutil::weighted_four_point();
        let cfg = SolverConfig::default().with_floor(1e-4);
        let sol = solve_schur(&schur_of(&dist), &cfg).unwrap();
        let lo = 0.6652 - 1e-3;
        let hi = std::f64::consts::FRAC_PI_2 * 0.6652 + 1e-3;
        assert!(
            sol.objective >= lo && sol.objective <= hi,
            "objective {} outside [{lo}, {hi}]",
            sol.objective
        );
        feasibility_ok(&sol.v, 1e-4);
    }

    #[test]
    fn schur_terms_stay_in_unit_interval() {
        let mut rng = testutil::rng(5);
        for _ in 0..40 {
            use rand::Rng;
            let n = rng.random_range(2..7usize);
            let dist = testutil::random_distribution(n, rng.random_range(1..6), &mut rng);
            let problem = schur_of(&dist);
            // random feasible V = G G^T scaled to unit diagonal cap
            let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let mut v = &g * g.transpose();
            let max_diag = v.diagonal().iter().fold(0.0_f64, |a, &d| a.max(d));
            v /= max_diag.max(1e-12);
            let eval = problem.eval(&v).unwrap();
            for &t in &eval.term_values {
                assert!(t >= -1e-9 && t <= 1.0 + 1e-9, "term {t} outside [0,1]");
            }
        }
    }

    #[test]
    fn schur_objective_is_concave_along_midpoints() {
        let mut rng = testutil::rng(6);
        let dist = testutil::random_distribution(5, 4, &mut rng);
        let problem = schur_of(&dist);
        let cfg = SolverConfig::default().with_floor(1e-6);
        let sol = solve_schur(&problem, &cfg).unwrap();
        use rand::Rng;
        for _ in 0..20 {
            let g = DMatrix::from_fn(5, 5, |_, _| rng.random_range(-1.0..1.0));
            let mut w = &g * g.transpose();
            let max_diag = w.diagonal().iter().fold(0.0_f64, |a, &d| a.max(d));
            w /= max_diag.max(1e-12);
            let f_v = problem.objective(&sol.v).unwrap();
            let f_w = problem.objective(&w).unwrap();
            let mid = (&sol.v + &w) * 0.5;
            let f_mid = problem.objective(&mid).unwrap();
            assert!(
                f_mid >= 0.5 * (f_v + f_w) - 1e-6,
                "midpoint value {f_mid} below chord {}",
                0.5 * (f_v + f_w)
            );
        }
    }

    #[test]
    fn schur_floor_costs_at_most_epsilon() {
        let mut rng = testutil::rng(8);
        for _ in 0..5 {
            let dist = testutil::random_distribution(4, 4, &mut rng);
            let problem = schur_of(&dist);
            let sol0 = solve_schur(&problem, &SolverConfig::default()).unwrap();
            let eps = 0.05;
            let sol_eps = solve_schur(&problem, &SolverConfig::default().with_floor(eps)).unwrap();
            assert!(
                sol_eps.objective >= sol0.objective - eps - sol0.residual - sol_eps.residual - 1e-9,
                "floored {} vs unfloored {}",
                sol_eps.objective,
                sol0.objective
            );
            assert!(sol_eps.objective <= sol0.objective + sol0.residual + sol_eps.residual + 1e-9);
        }
    }

    #[test]
    fn schur_gradient_matches_finite_differences() {
        let mut rng = testutil::rng(9);
        let dist = testutil::random_distribution(5, 5, &mut rng);
        let problem = schur_of(&dist);
        use rand::Rng;
        for _ in 0..10 {
            // interior feasible point: V = 0.6 I + 0.3 W, diag(W)=1
            let g = DMatrix::from_fn(5, 5, |_, _| rng.random_range(-1.0..1.0));
            let mut w = &g * g.transpose();
            let d: DVector<f64> = w.diagonal();
            for i in 0..5 {
                for j in 0..5 {
                    w[(i, j)] /= (d[i] * d[j]).sqrt();
                }
            }
            let v = DMatrix::identity(5, 5) * 0.6 + w * 0.3;
            let eval = problem.eval(&v).unwrap();
            let h = 1e-5;
            for (i, j) in [(0, 0), (1, 2), (3, 4), (2, 2)] {
                let mut vp = v.clone();
                let mut vm = v.clone();
                vp[(i, j)] += h;
                vm[(i, j)] -= h;
                if i != j {
                    vp[(j, i)] += h;
                    vm[(j, i)] -= h;
                }
                let fd = (problem.objective(&vp).unwrap() - problem.objective(&vm).unwrap())
                    / (2.0 * h);
                let analytic = if i == j {
                    eval.supergradient[(i, i)]
                } else {
                    2.0 * eval.supergradient[(i, j)]
                };
                let denom = fd.abs().max(analytic.abs()).max(1e-8);
                assert!(
                    ((fd - analytic) / denom).abs() <= 1e-4,
                    "fd {fd} vs analytic {analytic} at ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn schur_supergradient_is_quadratic_form_of_weights() {
        let mut rng = testutil::rng(10);
        let dist = testutil::random_distribution(4, 3, &mut rng);
        let problem = schur_of(&dist);
        let v = DMatrix::identity(4, 4);
        let eval = problem.eval(&v).unwrap();
        // <M(V), V> equals the objective at V
        let inner = (eval.supergradient.transpose() * &v).trace();
        assert!((inner - eval.objective).abs() < 1e-10);
    }

    #[test]
    fn config_validation() {
        let m = DMatrix::<f64>::identity(2, 2);
        let bad = SolverConfig { eig_floor: 1.0, ..Default::default() };
        assert!(solve_linear(&m, &bad).is_err());
        let bad = SolverConfig { rel_tol: 0.0, ..Default::default() };
        assert!(solve_linear(&m, &bad).is_err());
    }
}
