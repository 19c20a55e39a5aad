//! Joint optimisation of relay weights `A` and noise level `σ`.
//!
//! Minimises `R² σ_tv²(A) + σ_pr²(σ)` subject to nonnegative weights, the
//! per-row unbiasedness hyperplane `Σ_j p_j p_ij α_ij = 1`, and the privacy
//! box `α_ij ≤ w̃_ij(σ)`. The problem is not jointly convex, so the solver
//! alternates:
//!
//! 1. `L1` Gauss-Seidel row updates on the convex surrogate `σ̄_tv²`,
//! 2. `L2` row updates on `σ_tv²` itself, warm-started from step 1,
//! 3. the closed-form `σ` minimiser for the resulting `A`,
//!
//! for `K` outer rounds, starting from `σ = σ_thr` and `A = diag(1/p_i)`.
//!
//! Each row update is an exact minimisation: for fixed `λ` the row objective
//! separates across `j`, so `α_ij(λ)` is the unconstrained stationary point
//! clipped to `[0, w̃_ij]`, and `λ` is found by bisection so the row lands on
//! its hyperplane.

use serde::{Deserialize, Serialize};

use crate::analysis::{sigma_pr_sq, sigma_tv_sq, sigma_tv_sq_bar, unbiasedness_residual};
use crate::network::NetworkModel;
use crate::privacy::{achieved_epsilon, gaussian_factor, PrivacySpec};
use crate::{Error, Result, SquareMatrix};

/// Slack on `α_ij ≤ w̃_ij` when re-validating a solution.
pub const CAP_TOL: f64 = 1e-9;
/// Slack on row sums when re-validating a solution.
pub const ROW_TOL: f64 = 1e-6;
const MAX_BISECTIONS: usize = 400;
const MAX_BRACKET_DOUBLINGS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Outer alternating rounds `K`.
    pub outer_iters: usize,
    /// Row updates on the convex surrogate per round (`L1`).
    pub relax_iters: usize,
    /// Row updates on the original objective per round (`L2`).
    pub finetune_iters: usize,
    /// Relative width at which λ-bisection stops.
    pub bisection_tol: f64,
    /// A row whose attainable mass falls short of its target by more than
    /// this is infeasible.
    pub unbiased_tol: f64,
    /// Starting noise level.
    #[serde(default)]
    pub init_noise: InitNoise,
}

/// Where the alternating scheme starts σ.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitNoise {
    /// `σ_thr`; the first sweep pulls `diag(1/p)` inside the caps.
    Threshold,
    /// Least σ at which `diag(1/p)` already meets every cap.
    FitDiagonal,
    /// Run from `σ_thr·2^m` up to the diagonal fit and keep the lowest objective.
    #[default]
    Best,
}

impl OptimizerConfig {
    /// `K = 10`, `L1 = L2 = 50 n`.
    pub fn for_nodes(n: usize) -> Self {
        Self {
            outer_iters: 10,
            relax_iters: 50 * n,
            finetune_iters: 50 * n,
            bisection_tol: 1e-15,
            unbiased_tol: 1e-9,
            init_noise: InitNoise::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.outer_iters == 0 || self.relax_iters == 0 || self.finetune_iters == 0 {
            return Err(Error::Config("iteration counts must be at least 1".into()));
        }
        if !(self.bisection_tol > 0.0 && self.unbiased_tol > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSolution {
    pub alpha: SquareMatrix,
    pub sigma: f64,
}

impl WeightSolution {
    /// Checks nonnegativity, unbiasedness, privacy caps and zero weight on
    /// dead links. Reports the first violated constraint.
    pub fn check(&self, model: &NetworkModel, spec: &PrivacySpec) -> Result<()> {
        let n = model.n();
        if self.alpha.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: self.alpha.n(),
            });
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::InfeasibleSolution(format!("sigma = {}", self.sigma)));
        }
        let caps = spec.caps(self.sigma);
        for (i, j, a) in self.alpha.iter() {
            if !(a >= 0.0) {
                return Err(Error::InfeasibleSolution(format!("alpha[{i}][{j}] = {a} < 0")));
            }
            if a > caps[(i, j)] + CAP_TOL {
                return Err(Error::InfeasibleSolution(format!(
                    "alpha[{i}][{j}] = {a} exceeds cap {}",
                    caps[(i, j)]
                )));
            }
            if model.p_link(i, j) == 0.0 && a != 0.0 {
                return Err(Error::InfeasibleSolution(format!(
                    "alpha[{i}][{j}] = {a} on a link with p_ij = 0"
                )));
            }
        }
        for (i, r) in unbiasedness_residual(model, &self.alpha).into_iter().enumerate() {
            if r > ROW_TOL {
                return Err(Error::InfeasibleSolution(format!("row {i} unbiasedness residual {r:e}")));
            }
        }
        Ok(())
    }

    /// Largest `achieved ε_ij − ε̲_ij` over all links.
    pub fn max_privacy_excess(&self, model: &NetworkModel, spec: &PrivacySpec) -> Result<f64> {
        let n = model.n();
        let mut worst = f64::NEG_INFINITY;
        for i in 0..n {
            for j in 0..n {
                let g = achieved_epsilon(
                    self.alpha[(i, j)],
                    spec.r,
                    self.sigma,
                    spec.delta[(i, j)],
                    model.p_link(i, j),
                )?;
                worst = worst.max(g.epsilon - spec.eps[(i, j)]);
            }
        }
        Ok(worst)
    }
}

/// `R² σ_tv²(A) + σ_pr²(σ)`.
pub fn objective(model: &NetworkModel, spec: &PrivacySpec, alpha: &SquareMatrix, sigma: f64, d: usize) -> f64 {
    spec.r * spec.r * sigma_tv_sq(model, alpha) + sigma_pr_sq(model, sigma, d)
}

/// Smallest `σ` at which every row's privacy box reaches its unbiasedness
/// hyperplane:
///
/// ```text
/// σ_thr = 2R · max_i ( Σ_j p_j p_ij ε̲_ij / sqrt(2 ln(1.25/δ̲_ij)) )⁻¹
/// ```
pub fn sigma_threshold(model: &NetworkModel, spec: &PrivacySpec) -> Result<f64> {
    let n = model.n();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let reach: f64 = (0..n)
            .map(|j| model.relay_prob(i, j) * spec.eps[(i, j)] / gaussian_factor(spec.delta[(i, j)]))
            .sum();
        if !(reach > 0.0) {
            return Err(Error::InfeasibleThreshold { row: i });
        }
        worst = worst.max(1.0 / reach);
    }
    Ok(2.0 * spec.r * worst)
}

/// Closed-form minimiser of `σ_pr²` over `σ` for fixed `A`: the smallest
/// noise meeting every link budget, floored at `σ_thr`. Ties resolve to
/// the lowest `(i, j)`.
pub fn update_sigma(alpha: &SquareMatrix, spec: &PrivacySpec, sigma_thr: f64) -> Result<f64> {
    let mut sigma = sigma_thr;
    for (i, j, a) in alpha.iter() {
        if a <= 0.0 {
            continue;
        }
        let eps = spec.eps[(i, j)];
        if eps == 0.0 {
            return Err(Error::ZeroBudget {
                row: i,
                col: j,
                alpha: a,
            });
        }
        let needed = gaussian_factor(spec.delta[(i, j)]) * 2.0 * a * spec.r / eps;
        if needed > sigma {
            sigma = needed;
        }
    }
    Ok(sigma)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    /// Convex surrogate `σ̄_tv²`.
    Relaxed,
    /// Original objective `σ_tv²`.
    FineTune,
}

/// Which branch of the KKT solution produced a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowCase {
    /// `p_i = 1`: all weight stays on the self-link.
    SelfOnly,
    /// Perfect links (`p_j p_ij = 1`) alone cover the row.
    PerfectLinks,
    /// Bisection on λ over the imperfect links.
    Interior,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowUpdate {
    pub row: Vec<f64>,
    pub case: RowCase,
    /// Multiplier and the bisection interval it came from, for `Interior`.
    pub lambda: Option<f64>,
    pub bracket: Option<(f64, f64)>,
    /// Times the published upper end had to be doubled to bracket the root.
    pub bracket_doublings: usize,
}

/// One imperfect link's piece of the row problem:
/// `α(λ) = min{ ((λ − offset)/denom)⁺, cap }`.
#[derive(Debug, Clone, Copy)]
struct Term {
    col: usize,
    reach: f64,
    offset: f64,
    denom: f64,
    cap: f64,
}

impl Term {
    fn weight(&self, lambda: f64) -> f64 {
        ((lambda - self.offset) / self.denom).max(0.0).min(self.cap)
    }
}

fn row_mass(terms: &[Term], lambda: f64) -> f64 {
    terms.iter().map(|t| t.reach * t.weight(lambda)).sum()
}

/// Finds `λ ≥ 0` with `Σ_j p_j p_ij α_ij(λ) = target`, searching `[0, upper]`
/// and doubling `upper` if it fails to bracket. Returns `(λ, upper_used, doublings)`.
fn bisect_terms(terms: &[Term], target: f64, upper: f64, rel_tol: f64) -> (f64, f64, usize) {
    let mut hi = upper.max(f64::MIN_POSITIVE);
    let mut doublings = 0;
    while row_mass(terms, hi) < target && doublings < MAX_BRACKET_DOUBLINGS {
        hi *= 2.0;
        doublings += 1;
    }
    let (lambda, _) = bisect_monotone(|l| row_mass(terms, l), target, 0.0, hi, rel_tol);
    (lambda, hi, doublings)
}

/// Bisection for a nondecreasing continuous `f` with `f(lo) ≤ target ≤ f(hi)`.
/// Stops when the bracket is narrower than `rel_tol · max(1, hi)` or can no
/// longer shrink, then interpolates linearly inside the final bracket (exact
/// when `f` is linear there, as it is for piecewise-linear row masses).
/// Returns `(λ, iterations)`.
pub fn bisect_monotone(f: impl Fn(f64) -> f64, target: f64, lo: f64, hi: f64, rel_tol: f64) -> (f64, usize) {
    let (mut lo, mut hi) = (lo, hi);
    let mut f_lo = f(lo);
    let mut f_hi = f(hi);
    if f_lo >= target {
        return (lo, 0);
    }
    if f_hi <= target {
        return (hi, 0);
    }
    let mut iters = 0;
    while iters < MAX_BISECTIONS && hi - lo > rel_tol * hi.abs().max(1.0) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid < target {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
        iters += 1;
    }
    let lambda = if f_hi > f_lo {
        (lo + (target - f_lo) * (hi - lo) / (f_hi - f_lo)).clamp(lo, hi)
    } else {
        hi
    };
    (lambda, iters)
}

/// `Σ_{l≠i} p_lj α_lj` for every column `j`.
fn column_mass_excluding(model: &NetworkModel, alpha: &SquareMatrix, i: usize) -> Vec<f64> {
    let n = model.n();
    (0..n)
        .map(|j| {
            (0..n)
                .filter(|&l| l != i)
                .map(|l| model.p_link(l, j) * alpha[(l, j)])
                .sum()
        })
        .collect()
}

/// Exact minimiser of the `mode` objective over row `i`, other rows fixed.
pub fn row_update(
    i: usize,
    alpha: &SquareMatrix,
    model: &NetworkModel,
    caps: &SquareMatrix,
    mode: SweepMode,
    config: &OptimizerConfig,
) -> Result<RowUpdate> {
    let n = model.n();
    let p_i = model.p_ps(i);
    let mut row = vec![0.0; n];

    if p_i == 1.0 && caps[(i, i)] >= 1.0 {
        row[i] = 1.0;
        return Ok(RowUpdate {
            row,
            case: RowCase::SelfOnly,
            lambda: None,
            bracket: None,
            bracket_doublings: 0,
        });
    }

    let column_mass = column_mass_excluding(model, alpha, i);
    let mut perfect_mass = 0.0;
    let mut perfect = Vec::new();
    let mut terms = Vec::new();
    for j in 0..n {
        let reach = model.relay_prob(i, j);
        if reach == 0.0 {
            continue;
        }
        if reach == 1.0 {
            perfect_mass += caps[(i, j)];
            perfect.push(j);
            continue;
        }
        let p_j = model.p_ps(j);
        let p_ij = model.p_link(i, j);
        // E_ij / p_ij − p_ji >= 0: excess reciprocity over independence.
        let excess = p_i * (model.e(i, j) / p_ij - model.p_link(j, i));
        let spill = 2.0 * (1.0 - p_j) * column_mass[j];
        let (offset, denom) = match mode {
            SweepMode::Relaxed => (spill, 2.0 * ((1.0 - reach) + excess)),
            SweepMode::FineTune => (spill + 2.0 * excess * alpha[(j, i)], 2.0 * (1.0 - reach)),
        };
        terms.push(Term {
            col: j,
            reach,
            offset,
            denom,
            cap: caps[(i, j)],
        });
    }

    if !perfect.is_empty() && perfect_mass >= 1.0 {
        for &j in &perfect {
            row[j] = caps[(i, j)] / perfect_mass;
        }
        return Ok(RowUpdate {
            row,
            case: RowCase::PerfectLinks,
            lambda: None,
            bracket: None,
            bracket_doublings: 0,
        });
    }
    for &j in &perfect {
        row[j] = caps[(i, j)];
    }
    let target = 1.0 - perfect_mass;

    let attainable: f64 = terms.iter().map(|t| t.reach * t.cap).sum();
    if attainable < target - config.unbiased_tol {
        return Err(Error::InfeasibleRow {
            row: i,
            deficit: attainable + perfect_mass - 1.0,
        });
    }
    if attainable <= target {
        for t in &terms {
            row[t.col] = t.cap;
        }
        return Ok(RowUpdate {
            row,
            case: RowCase::Interior,
            lambda: None,
            bracket: None,
            bracket_doublings: 0,
        });
    }

    let upper = lambda_upper_bound(&terms);
    let (lambda, hi, doublings) = bisect_terms(&terms, target, upper, config.bisection_tol);
    for t in &terms {
        row[t.col] = t.weight(lambda);
    }
    Ok(RowUpdate {
        row,
        case: RowCase::Interior,
        lambda: Some(lambda),
        bracket: Some((0.0, hi)),
        bracket_doublings: doublings,
    })
}

/// Published bisection interval end: `max_j (offset_j + denom_j / (p_j p_ij))`,
/// the multiplier at which any single link alone would carry the whole row.
fn lambda_upper_bound(terms: &[Term]) -> f64 {
    terms
        .iter()
        .map(|t| t.offset + t.denom / t.reach)
        .fold(0.0, f64::max)
}

pub fn relaxed_row_update(
    i: usize,
    alpha: &SquareMatrix,
    model: &NetworkModel,
    caps: &SquareMatrix,
    config: &OptimizerConfig,
) -> Result<RowUpdate> {
    row_update(i, alpha, model, caps, SweepMode::Relaxed, config)
}

pub fn finetune_row_update(
    i: usize,
    alpha: &SquareMatrix,
    model: &NetworkModel,
    caps: &SquareMatrix,
    config: &OptimizerConfig,
) -> Result<RowUpdate> {
    row_update(i, alpha, model, caps, SweepMode::FineTune, config)
}

/// Surrogate or original objective, matching `mode`.
pub fn sweep_objective(model: &NetworkModel, alpha: &SquareMatrix, mode: SweepMode) -> f64 {
    match mode {
        SweepMode::Relaxed => sigma_tv_sq_bar(model, alpha),
        SweepMode::FineTune => sigma_tv_sq(model, alpha),
    }
}

/// Runs `iters` cyclic row updates; iteration `ℓ` (1-based) touches row
/// `(ℓ − 1) mod n`. `on_step` sees the matrix after every update.
pub fn gauss_seidel_sweeps_with(
    alpha_init: &SquareMatrix,
    model: &NetworkModel,
    caps: &SquareMatrix,
    iters: usize,
    mode: SweepMode,
    config: &OptimizerConfig,
    mut on_step: impl FnMut(usize, &SquareMatrix),
) -> Result<SquareMatrix> {
    let n = model.n();
    let mut alpha = alpha_init.clone();
    for step in 0..iters {
        let i = step % n;
        let update = row_update(i, &alpha, model, caps, mode, config)?;
        alpha.row_mut(i).copy_from_slice(&update.row);
        on_step(step + 1, &alpha);
    }
    Ok(alpha)
}

pub fn gauss_seidel_sweeps(
    alpha_init: &SquareMatrix,
    model: &NetworkModel,
    caps: &SquareMatrix,
    iters: usize,
    mode: SweepMode,
    config: &OptimizerConfig,
) -> Result<SquareMatrix> {
    gauss_seidel_sweeps_with(alpha_init, model, caps, iters, mode, config, |_, _| {})
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuterIteration {
    /// 0 is the initial point.
    pub round: usize,
    pub sigma: f64,
    pub tiv_bound: f64,
    pub piv: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeReport {
    pub solution: WeightSolution,
    pub sigma_thr: f64,
    pub objective: f64,
    pub trace: Vec<OuterIteration>,
}

fn trace_point(
    round: usize,
    model: &NetworkModel,
    spec: &PrivacySpec,
    alpha: &SquareMatrix,
    sigma: f64,
    d: usize,
) -> OuterIteration {
    let tiv_bound = spec.r * spec.r * sigma_tv_sq(model, alpha);
    let piv = sigma_pr_sq(model, sigma, d);
    OuterIteration {
        round,
        sigma,
        tiv_bound,
        piv,
        objective: tiv_bound + piv,
    }
}

/// Alternating minimisation over `(A, σ)` for data dimension `d`, starting
/// from `A = diag(1/p_i)`. The σ-step never raises σ above its start, so the
/// starting noise is chosen by `config.init_noise`.
pub fn optimize(
    model: &NetworkModel,
    spec: &PrivacySpec,
    d: usize,
    config: &OptimizerConfig,
) -> Result<OptimizeReport> {
    model.ensure_valid()?;
    spec.validate(model)?;
    config.validate()?;
    let sigma_thr = sigma_threshold(model, spec)?;
    let init: Vec<f64> = model.p().iter().map(|p| 1.0 / p).collect();
    let alpha = SquareMatrix::diagonal(&init);
    match config.init_noise {
        InitNoise::Threshold => alternate(model, spec, d, config, alpha, sigma_thr, sigma_thr),
        InitNoise::FitDiagonal => {
            let sigma = update_sigma(&alpha, spec, sigma_thr)?;
            alternate(model, spec, d, config, alpha, sigma, sigma_thr)
        }
        InitNoise::Best => {
            let fit = update_sigma(&alpha, spec, sigma_thr)?;
            let mut best: Option<OptimizeReport> = None;
            let mut first_err = None;
            let mut start = sigma_thr;
            loop {
                let start_sigma = start.min(fit);
                match alternate(model, spec, d, config, alpha.clone(), start_sigma, sigma_thr) {
                    Ok(r) if best.as_ref().is_none_or(|b| r.objective < b.objective) => best = Some(r),
                    Ok(_) => {}
                    Err(e) => {
                        first_err.get_or_insert(e);
                    }
                }
                if start_sigma >= fit {
                    break;
                }
                start *= 2.0;
            }
            best.ok_or_else(|| first_err.expect("at least one start ran"))
        }
    }
}

fn alternate(
    model: &NetworkModel,
    spec: &PrivacySpec,
    d: usize,
    config: &OptimizerConfig,
    mut alpha: SquareMatrix,
    mut sigma: f64,
    sigma_thr: f64,
) -> Result<OptimizeReport> {
    let mut trace = vec![trace_point(0, model, spec, &alpha, sigma, d)];

    for round in 1..=config.outer_iters {
        let caps = spec.caps(sigma);
        alpha = gauss_seidel_sweeps(&alpha, model, &caps, config.relax_iters, SweepMode::Relaxed, config)?;
        alpha = gauss_seidel_sweeps(&alpha, model, &caps, config.finetune_iters, SweepMode::FineTune, config)?;
        sigma = update_sigma(&alpha, spec, sigma_thr)?;
        trace.push(trace_point(round, model, spec, &alpha, sigma, d));
    }

    let solution = WeightSolution { alpha, sigma };
    solution.check(model, spec)?;
    let objective = trace.last().map(|t| t.objective).unwrap_or(f64::NAN);
    Ok(OptimizeReport {
        solution,
        sigma_thr,
        objective,
        trace,
    })
}
