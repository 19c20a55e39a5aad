//! Two-stage collaborative relaying and the naïve baseline.
//!
//! Stage 1: node `i` forms `x̃_i = Σ_j τ_ji (α_ji x_j + n_ji)` from whatever
//! its neighbours managed to send (its own term always arrives).
//! Stage 2: the PS averages the local aggregates it receives, dividing by `n`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::network::{LinkRealization, NetworkModel};
use crate::privacy::sample_noise;
use crate::sum::Compensated;
use crate::{Error, Result, SquareMatrix};

/// Relative slack on `‖x_i‖ ≤ R` to absorb normalisation round-off.
const NORM_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSet {
    pub x: Vec<Vec<f64>>,
}

impl DataSet {
    pub fn new(x: Vec<Vec<f64>>) -> Result<Self> {
        let d = x.first().map_or(0, Vec::len);
        if d == 0 {
            return Err(Error::Config("data set needs at least one node and d >= 1".into()));
        }
        if let Some(bad) = x.iter().find(|v| v.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: bad.len(),
            });
        }
        Ok(Self { x })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn d(&self) -> usize {
        self.x[0].len()
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.n() as f64;
        (0..self.d())
            .map(|k| {
                let mut acc = Compensated::default();
                for v in &self.x {
                    acc.add(v[k]);
                }
                acc.value() / n
            })
            .collect()
    }

    pub fn check_norms(&self, r: f64) -> Result<()> {
        for (node, v) in self.x.iter().enumerate() {
            let norm = norm(v);
            if norm > r * (1.0 + NORM_SLACK) {
                return Err(Error::NormBound { node, norm, bound: r });
            }
        }
        Ok(())
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub estimate: Vec<f64>,
    pub squared_error: f64,
    pub realization: LinkRealization,
}

fn check_shapes(n: usize, data: &DataSet, alpha: &SquareMatrix, links: &LinkRealization) -> Result<()> {
    for actual in [data.n(), alpha.n(), links.n()] {
        if actual != n {
            return Err(Error::DimensionMismatch { expected: n, actual });
        }
    }
    Ok(())
}

/// Stage 1. Noise for every ordered pair `(sender j, receiver i)` is drawn in
/// sender-major order whether or not the link is up.
pub fn stage1_local_aggregate<R: Rng + ?Sized>(
    data: &DataSet,
    alpha: &SquareMatrix,
    sigma: f64,
    links: &LinkRealization,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    let n = data.n();
    check_shapes(n, data, alpha, links)?;
    Ok(local_aggregate_unchecked(data, alpha, sigma, links, rng))
}

fn local_aggregate_unchecked<R: Rng + ?Sized>(
    data: &DataSet,
    alpha: &SquareMatrix,
    sigma: f64,
    links: &LinkRealization,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let (n, d) = (data.n(), data.d());
    let mut local = vec![vec![0.0; d]; n];
    for j in 0..n {
        for (i, acc) in local.iter_mut().enumerate() {
            let noise = sample_noise(sigma, d, rng);
            if i != j && !links.tau_nn[j][i] {
                continue;
            }
            let w = alpha[(j, i)];
            for ((a, &x), z) in acc.iter_mut().zip(&data.x[j]).zip(noise) {
                *a += w * x + z;
            }
        }
    }
    local
}

/// Stage 2: `x̂ = (1/n) Σ_i τ_i x̃_i`.
pub fn stage2_global_aggregate(local: &[Vec<f64>], tau_ps: &[bool]) -> Result<Vec<f64>> {
    let n = local.len();
    if tau_ps.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: tau_ps.len(),
        });
    }
    let d = local.first().map_or(0, Vec::len);
    let mut out = vec![0.0; d];
    for (v, &up) in local.iter().zip(tau_ps) {
        if v.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: v.len(),
            });
        }
        if up {
            for (o, x) in out.iter_mut().zip(v) {
                *o += x;
            }
        }
    }
    let nf = n as f64;
    out.iter_mut().for_each(|o| *o /= nf);
    Ok(out)
}

/// PS averages the raw vectors it receives directly, dividing by `n`.
pub fn naive_estimate(data: &DataSet, tau_ps: &[bool]) -> Result<Vec<f64>> {
    stage2_global_aggregate(&data.x, tau_ps)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MseEstimate {
    pub mse: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub pricer: TrialResult,
    pub naive_estimate: Vec<f64>,
    pub naive_squared_error: f64,
}

#[derive(Debug, Clone)]
pub struct MonteCarloReport {
    pub pricer: MseEstimate,
    pub naive: MseEstimate,
    pub trials: Vec<TrialRecord>,
}

impl MonteCarloReport {
    /// Componentwise mean of the PriCER estimates and its standard error.
    pub fn mean_estimate(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.trials[0].pricer.estimate.len();
        let t = self.trials.len();
        let mut mean = vec![0.0; d];
        let mut stderr = vec![0.0; d];
        for k in 0..d {
            let s = summarize(self.trials.iter().map(|r| r.pricer.estimate[k]), t);
            mean[k] = s.mse;
            stderr[k] = s.stderr;
        }
        (mean, stderr)
    }
}

fn summarize<I: Iterator<Item = f64> + Clone>(values: I, count: usize) -> MseEstimate {
    let t = count as f64;
    let mut acc = Compensated::default();
    for v in values.clone() {
        acc.add(v);
    }
    let mean = acc.value() / t;
    if count < 2 {
        return MseEstimate { mse: mean, stderr: 0.0 };
    }
    let mut dev = Compensated::default();
    for v in values {
        dev.add((v - mean) * (v - mean));
    }
    let var = dev.value() / (t - 1.0);
    MseEstimate {
        mse: mean,
        stderr: (var / t).sqrt(),
    }
}

/// Random stream for trial `t`: ChaCha keyed by the master seed, stream id `t`.
pub fn trial_rng(master_seed: u64, trial: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
    rng.set_stream(trial);
    rng
}

fn run_trial(
    model: &NetworkModel,
    data: &DataSet,
    alpha: &SquareMatrix,
    sigma: f64,
    target: &[f64],
    master_seed: u64,
    t: u64,
) -> TrialRecord {
    let mut rng = trial_rng(master_seed, t);
    let links = model.sample_links_unchecked(&mut rng);
    let local = local_aggregate_unchecked(data, alpha, sigma, &links, &mut rng);
    let estimate = stage2_global_aggregate(&local, &links.tau_ps).expect("shapes checked");
    let naive = naive_estimate(data, &links.tau_ps).expect("shapes checked");
    TrialRecord {
        pricer: TrialResult {
            squared_error: squared_distance(&estimate, target),
            estimate,
            realization: links,
        },
        naive_squared_error: squared_distance(&naive, target),
        naive_estimate: naive,
    }
}

/// Empirical MSE of PriCER and of the naïve scheme over `trials` independent
/// draws. Trial `t` uses [`trial_rng`]`(master_seed, t)`, so the result is
/// identical however many threads execute it.
pub fn run_monte_carlo(
    model: &NetworkModel,
    data: &DataSet,
    alpha: &SquareMatrix,
    sigma: f64,
    trials: usize,
    master_seed: u64,
) -> Result<MonteCarloReport> {
    if trials == 0 {
        return Err(Error::NoTrials);
    }
    model.ensure_valid()?;
    let n = model.n();
    check_shapes(n, data, alpha, &LinkRealization::all_connected(n))?;
    let target = data.mean();
    let records: Vec<TrialRecord> = (0..trials as u64)
        .into_par_iter()
        .map(|t| run_trial(model, data, alpha, sigma, &target, master_seed, t))
        .collect();
    let pricer = summarize(records.iter().map(|r| r.pricer.squared_error), trials);
    let naive = summarize(records.iter().map(|r| r.naive_squared_error), trials);
    Ok(MonteCarloReport {
        pricer,
        naive,
        trials: records,
    })
}
