//! Config-driven sweeps: optimised objective versus trust radius, and
//! empirical MSE of collaborative relaying versus the naïve scheme as the
//! number of well-connected nodes grows.
//!
//! Node `i` trusts the `k` ring neighbours `i+1, …, i+⌈k/2⌉` and
//! `i−1, …, i−⌊k/2⌋` (mod `n`). Trusted links get `ε_high`, the rest
//! `ε_low`, and every self-link `ε_high`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::network::{independent_reciprocity, NetworkModel};
use crate::optimizer::{optimize, InitNoise, OptimizerConfig, WeightSolution, CAP_TOL};
use crate::privacy::PrivacySpec;
use crate::protocol::{norm, run_monte_carlo, DataSet};
use crate::{Error, Result, SquareMatrix};

/// Stream id reserved for data generation; trials use streams `0..trials`.
pub const DATA_STREAM: u64 = u64::MAX;

/// PS probabilities of the ten-node trust sweep.
pub const DEFAULT_P: [f64; 10] = [0.1, 0.1, 0.8, 0.1, 0.1, 0.9, 0.1, 0.1, 0.9, 0.1];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    TrustSweep,
    GoodNodesSweep,
    Custom,
}

impl ExperimentKind {
    pub fn file_stem(self) -> &'static str {
        match self {
            ExperimentKind::TrustSweep => "trust_sweep",
            ExperimentKind::GoodNodesSweep => "good_nodes_sweep",
            ExperimentKind::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReciprocityPolicy {
    /// `E_ij = p_ij p_ji`.
    Independent,
    Explicit(SquareMatrix),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    #[serde(default = "default_n")]
    pub n: usize,
    /// Node → PS probabilities; defaults to [`DEFAULT_P`] when `n = 10`.
    #[serde(default)]
    pub p: Option<Vec<f64>>,
    /// Off-diagonal link probability when `link_matrix` is absent.
    #[serde(default = "default_p_c")]
    pub p_c: f64,
    /// Which pairs get `p_c`; defaults to `trusted` for `good_nodes_sweep`
    /// and `all` otherwise. Ignored when `link_matrix` is given.
    #[serde(default)]
    pub links: Option<LinkLayout>,
    #[serde(default)]
    pub link_matrix: Option<SquareMatrix>,
    #[serde(default = "default_reciprocity")]
    pub reciprocity: ReciprocityPolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkLayout {
    /// Every ordered pair.
    All,
    /// Only pairs within the configured trust radius.
    Trusted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrivacyConfig {
    #[serde(default = "default_eps_high")]
    pub eps_high: f64,
    #[serde(default = "default_eps_low")]
    pub eps_low: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_r")]
    pub r: f64,
    /// Ring trust radius for `good_nodes_sweep` and `custom`.
    #[serde(default = "default_trusted")]
    pub trusted_neighbors: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataDistribution {
    /// Cubed standard normal coordinates, rescaled to norm `R`.
    HeavyTailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default = "default_distribution")]
    pub distribution: DataDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSettings {
    #[serde(default = "default_outer")]
    pub outer_iters: usize,
    /// Defaults to `50 n`.
    #[serde(default)]
    pub relax_iters: Option<usize>,
    /// Defaults to `50 n`.
    #[serde(default)]
    pub finetune_iters: Option<usize>,
    #[serde(default = "default_bisection_tol")]
    pub bisection_tol: f64,
    #[serde(default = "default_unbiased_tol")]
    pub unbiased_tol: f64,
    #[serde(default)]
    pub init_noise: InitNoise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Trust radii for `trust_sweep`; defaults to `0..n`.
    #[serde(default)]
    pub trusted: Option<Vec<usize>>,
    /// Good-node counts for `good_nodes_sweep`; defaults to `0..=n`.
    #[serde(default)]
    pub good_counts: Option<Vec<usize>>,
    #[serde(default = "default_p_good")]
    pub p_good: f64,
    #[serde(default = "default_p_bad")]
    pub p_bad: f64,
    /// Also run Monte-Carlo at each trust radius.
    #[serde(default)]
    pub empirical_mse: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default)]
    pub privacy: PrivacyConfig,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub optimizer: OptimizerSettings,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_n() -> usize {
    10
}
fn default_p_c() -> f64 {
    0.8
}
fn default_reciprocity() -> ReciprocityPolicy {
    ReciprocityPolicy::Independent
}
fn default_eps_high() -> f64 {
    1e3
}
fn default_eps_low() -> f64 {
    0.1
}
fn default_delta() -> f64 {
    1e-3
}
fn default_r() -> f64 {
    1.0
}
fn default_trusted() -> usize {
    6
}
fn default_d() -> usize {
    32
}
fn default_distribution() -> DataDistribution {
    DataDistribution::HeavyTailed
}
fn default_outer() -> usize {
    10
}
fn default_bisection_tol() -> f64 {
    1e-15
}
fn default_unbiased_tol() -> f64 {
    1e-9
}
fn default_p_good() -> f64 {
    0.9
}
fn default_p_bad() -> f64 {
    0.2
}
fn default_trials() -> usize {
    50
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            n: default_n(),
            p: None,
            p_c: default_p_c(),
            links: None,
            link_matrix: None,
            reciprocity: default_reciprocity(),
        }
    }
}

impl Default for PrivacyConfig {
    fn default() -> Self {
        Self {
            eps_high: default_eps_high(),
            eps_low: default_eps_low(),
            delta: default_delta(),
            r: default_r(),
            trusted_neighbors: default_trusted(),
        }
    }
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            d: default_d(),
            distribution: default_distribution(),
        }
    }
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            outer_iters: default_outer(),
            relax_iters: None,
            finetune_iters: None,
            bisection_tol: default_bisection_tol(),
            unbiased_tol: default_unbiased_tol(),
            init_noise: InitNoise::default(),
        }
    }
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            trusted: None,
            good_counts: None,
            p_good: default_p_good(),
            p_bad: default_p_bad(),
            empirical_mse: false,
        }
    }
}

fn check_prob(name: &str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Probability {
            name: name.into(),
            value,
        })
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.network.n;
        if n == 0 {
            return Err(Error::Config("network.n must be positive".into()));
        }
        if self.trials == 0 {
            return Err(Error::NoTrials);
        }
        if self.data.d == 0 {
            return Err(Error::Config("data.d must be positive".into()));
        }
        check_prob("p_c", self.network.p_c)?;
        check_prob("p_good", self.sweep.p_good)?;
        check_prob("p_bad", self.sweep.p_bad)?;
        if let Some(p) = &self.network.p {
            if p.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: p.len(),
                });
            }
            for (i, &v) in p.iter().enumerate() {
                check_prob(&format!("p_{}", i + 1), v)?;
            }
        } else if n != DEFAULT_P.len() && self.kind != ExperimentKind::GoodNodesSweep {
            return Err(Error::Config(format!(
                "network.p is required when n = {n} (defaults exist only for n = 10)"
            )));
        }
        if let Some(m) = &self.network.link_matrix {
            if m.n() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: m.n(),
                });
            }
            for (i, j, v) in m.iter() {
                check_prob(&format!("p_{}{}", i + 1, j + 1), v)?;
            }
        }
        if let ReciprocityPolicy::Explicit(m) = &self.network.reciprocity {
            if m.n() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: m.n(),
                });
            }
        }
        if let Some(counts) = &self.sweep.good_counts {
            if let Some(&c) = counts.iter().find(|&&c| c > n) {
                return Err(Error::Config(format!("good count {c} exceeds n = {n}")));
            }
        }
        self.optimizer_config().validate()
    }

    /// Copy with every defaulted field written out explicitly.
    pub fn resolved(&self) -> Self {
        let n = self.network.n;
        let mut out = self.clone();
        if out.network.p.is_none() && n == DEFAULT_P.len() && self.kind != ExperimentKind::GoodNodesSweep {
            out.network.p = Some(DEFAULT_P.to_vec());
        }
        out.network.links = Some(self.link_layout());
        out.optimizer.relax_iters.get_or_insert(50 * n);
        out.optimizer.finetune_iters.get_or_insert(50 * n);
        match self.kind {
            ExperimentKind::TrustSweep => {
                out.sweep.trusted.get_or_insert_with(|| (0..n).collect());
            }
            ExperimentKind::GoodNodesSweep => {
                out.sweep.good_counts.get_or_insert_with(|| (0..=n).collect());
            }
            ExperimentKind::Custom => {}
        }
        out
    }

    pub fn optimizer_config(&self) -> OptimizerConfig {
        let n = self.network.n;
        OptimizerConfig {
            outer_iters: self.optimizer.outer_iters,
            relax_iters: self.optimizer.relax_iters.unwrap_or(50 * n),
            finetune_iters: self.optimizer.finetune_iters.unwrap_or(50 * n),
            bisection_tol: self.optimizer.bisection_tol,
            unbiased_tol: self.optimizer.unbiased_tol,
            init_noise: self.optimizer.init_noise,
        }
    }

    fn ps_probabilities(&self) -> Result<Vec<f64>> {
        match &self.network.p {
            Some(p) => Ok(p.clone()),
            None if self.network.n == DEFAULT_P.len() => Ok(DEFAULT_P.to_vec()),
            None => Err(Error::Config("network.p missing".into())),
        }
    }

    pub fn link_layout(&self) -> LinkLayout {
        self.network.links.unwrap_or(match self.kind {
            ExperimentKind::GoodNodesSweep => LinkLayout::Trusted,
            _ => LinkLayout::All,
        })
    }

    /// Network with the given PS probabilities and the configured links.
    pub fn model_with_ps(&self, p: Vec<f64>) -> Result<NetworkModel> {
        let n = self.network.n;
        let link = match &self.network.link_matrix {
            Some(m) => m.clone(),
            None => {
                let mut link = SquareMatrix::identity(n);
                for i in 0..n {
                    let peers: Vec<usize> = match self.link_layout() {
                        LinkLayout::Trusted => trusted_neighbors(i, self.privacy.trusted_neighbors, n),
                        _ => (0..n).filter(|&j| j != i).collect(),
                    };
                    for j in peers {
                        link[(i, j)] = self.network.p_c;
                    }
                }
                link
            }
        };
        let reciprocity = match &self.network.reciprocity {
            ReciprocityPolicy::Independent => independent_reciprocity(&link),
            ReciprocityPolicy::Explicit(m) => m.clone(),
        };
        let model = NetworkModel::new(p, link, reciprocity)?;
        model.ensure_valid()?;
        Ok(model)
    }

    pub fn model(&self) -> Result<NetworkModel> {
        self.model_with_ps(self.ps_probabilities()?)
    }

    pub fn privacy_spec(&self, trusted: usize) -> PrivacySpec {
        let c = &self.privacy;
        ring_trust_spec(self.network.n, trusted, c.eps_high, c.eps_low, c.delta, c.r)
    }
}

/// Ring neighbours node `i` trusts at radius `k`: `⌈k/2⌉` above, `⌊k/2⌋` below.
pub fn trusted_neighbors(i: usize, k: usize, n: usize) -> Vec<usize> {
    let k = k.min(n.saturating_sub(1));
    let up = k.div_ceil(2);
    let down = k / 2;
    let mut out: Vec<usize> = (1..=up).map(|s| (i + s) % n).collect();
    out.extend((1..=down).map(|s| (i + n - s % n) % n));
    out
}

pub fn ring_trust_spec(n: usize, k: usize, eps_high: f64, eps_low: f64, delta: f64, r: f64) -> PrivacySpec {
    let mut eps = SquareMatrix::filled(n, eps_low);
    for i in 0..n {
        eps[(i, i)] = eps_high;
        for j in trusted_neighbors(i, k, n) {
            eps[(i, j)] = eps_high;
        }
    }
    PrivacySpec {
        r,
        eps,
        delta: SquareMatrix::filled(n, delta),
    }
}

/// Each coordinate is a cubed standard normal; each vector is then scaled
/// to norm exactly `r`.
pub fn generate_heavy_tailed_data<R: Rng + ?Sized>(n: usize, d: usize, r: f64, rng: &mut R) -> DataSet {
    let x = (0..n)
        .map(|_| {
            let mut v: Vec<f64> = (0..d)
                .map(|_| {
                    let z: f64 = rng.sample(StandardNormal);
                    z * z * z
                })
                .collect();
            let len = norm(&v);
            if len > 0.0 {
                v.iter_mut().for_each(|c| *c *= r / len);
            }
            v
        })
        .collect();
    DataSet { x }
}

pub fn data_rng(master_seed: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
    rng.set_stream(DATA_STREAM);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustRow {
    pub k_trusted: usize,
    pub objective: Option<f64>,
    pub sigma: Option<f64>,
    pub feasible: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mse_empirical: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mse_empirical_stderr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip)]
    pub solution: Option<WeightSolution>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodNodesRow {
    pub num_good: usize,
    pub mse_pricer: Option<f64>,
    pub mse_pricer_stderr: Option<f64>,
    pub mse_naive: Option<f64>,
    pub mse_naive_stderr: Option<f64>,
    pub trials: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip)]
    pub solution: Option<WeightSolution>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ResultTable {
    Trust(Vec<TrustRow>),
    GoodNodes(Vec<GoodNodesRow>),
}

impl ResultTable {
    pub fn error_count(&self) -> usize {
        match self {
            ResultTable::Trust(rows) => rows.iter().filter(|r| r.error.is_some()).count(),
            ResultTable::GoodNodes(rows) => rows.iter().filter(|r| r.error.is_some()).count(),
        }
    }
}

/// Optimises and re-checks the result against every feasibility constraint.
fn solve_checked(
    model: &NetworkModel,
    spec: &PrivacySpec,
    d: usize,
    config: &OptimizerConfig,
) -> Result<(WeightSolution, f64)> {
    let report = optimize(model, spec, d, config)?;
    report.solution.check(model, spec)?;
    let excess = report.solution.max_privacy_excess(model, spec)?;
    if excess > CAP_TOL {
        return Err(Error::InfeasibleSolution(format!("privacy budget exceeded by {excess:e}")));
    }
    if report.solution.sigma < report.sigma_thr {
        return Err(Error::InfeasibleSolution("sigma below threshold".into()));
    }
    Ok((report.solution, report.objective))
}

/// Optimised objective at each trust radius. Points that fail are recorded
/// with their error and the sweep continues.
pub fn run_trust_sweep(config: &ExperimentConfig) -> Result<Vec<TrustRow>> {
    config.validate()?;
    let config = config.resolved();
    let model = config.model()?;
    let opt = config.optimizer_config();
    let d = config.data.d;
    let radii = config.sweep.trusted.clone().unwrap_or_default();
    let data = if config.sweep.empirical_mse {
        Some(generate_heavy_tailed_data(model.n(), d, config.privacy.r, &mut data_rng(config.master_seed)))
    } else {
        None
    };
    Ok(radii
        .par_iter()
        .map(|&k| {
            let spec = config.privacy_spec(k);
            let outcome = solve_checked(&model, &spec, d, &opt).and_then(|(sol, obj)| {
                let mc = match &data {
                    Some(data) => Some(run_monte_carlo(
                        &model,
                        data,
                        &sol.alpha,
                        sol.sigma,
                        config.trials,
                        config.master_seed,
                    )?),
                    None => None,
                };
                Ok((sol, obj, mc))
            });
            match outcome {
                Ok((sol, obj, mc)) => TrustRow {
                    k_trusted: k,
                    objective: Some(obj),
                    sigma: Some(sol.sigma),
                    feasible: true,
                    mse_empirical: mc.as_ref().map(|m| m.pricer.mse),
                    mse_empirical_stderr: mc.as_ref().map(|m| m.pricer.stderr),
                    error: None,
                    solution: Some(sol),
                },
                Err(e) => TrustRow {
                    k_trusted: k,
                    objective: None,
                    sigma: None,
                    feasible: false,
                    mse_empirical: None,
                    mse_empirical_stderr: None,
                    error: Some(e.to_string()),
                    solution: None,
                },
            }
        })
        .collect())
}

/// Empirical MSE of both schemes as the first `num_good` nodes switch from
/// `p_bad` to `p_good`. One data set (drawn from the master seed) is shared
/// by every point, and every point uses the same trial streams.
pub fn run_good_nodes_sweep(config: &ExperimentConfig) -> Result<Vec<GoodNodesRow>> {
    config.validate()?;
    let config = config.resolved();
    let n = config.network.n;
    let d = config.data.d;
    let opt = config.optimizer_config();
    let spec = config.privacy_spec(config.privacy.trusted_neighbors);
    let data = generate_heavy_tailed_data(n, d, config.privacy.r, &mut data_rng(config.master_seed));
    let counts = config.sweep.good_counts.clone().unwrap_or_default();
    Ok(counts
        .par_iter()
        .map(|&good| {
            let p: Vec<f64> = (0..n)
                .map(|i| if i < good { config.sweep.p_good } else { config.sweep.p_bad })
                .collect();
            let outcome = config.model_with_ps(p).and_then(|model| {
                let (sol, obj) = solve_checked(&model, &spec, d, &opt)?;
                let mc = run_monte_carlo(&model, &data, &sol.alpha, sol.sigma, config.trials, config.master_seed)?;
                Ok((sol, obj, mc))
            });
            match outcome {
                Ok((sol, obj, mc)) => GoodNodesRow {
                    num_good: good,
                    mse_pricer: Some(mc.pricer.mse),
                    mse_pricer_stderr: Some(mc.pricer.stderr),
                    mse_naive: Some(mc.naive.mse),
                    mse_naive_stderr: Some(mc.naive.stderr),
                    trials: config.trials,
                    seed: config.master_seed,
                    objective: Some(obj),
                    error: None,
                    solution: Some(sol),
                },
                Err(e) => GoodNodesRow {
                    num_good: good,
                    mse_pricer: None,
                    mse_pricer_stderr: None,
                    mse_naive: None,
                    mse_naive_stderr: None,
                    trials: config.trials,
                    seed: config.master_seed,
                    objective: None,
                    error: Some(e.to_string()),
                    solution: None,
                },
            }
        })
        .collect())
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ResultTable> {
    match config.kind {
        ExperimentKind::TrustSweep => run_trust_sweep(config).map(ResultTable::Trust),
        ExperimentKind::GoodNodesSweep => run_good_nodes_sweep(config).map(ResultTable::GoodNodes),
        ExperimentKind::Custom => Err(Error::Config(
            "custom experiments are driven by the optimize/simulate commands".into(),
        )),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV body for a result table. Floats use the shortest representation that
/// round-trips; missing values are empty fields.
pub fn table_to_csv(table: &ResultTable) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_err = |source| Error::Csv {
        path: PathBuf::from("<memory>"),
        source,
    };
    match table {
        ResultTable::Trust(rows) => {
            let empirical = rows.iter().any(|r| r.mse_empirical.is_some());
            let mut header = vec!["k_trusted", "objective", "sigma", "feasible"];
            if empirical {
                header.extend(["mse_empirical", "mse_empirical_stderr"]);
            }
            w.write_record(&header).map_err(to_err)?;
            for r in rows {
                let mut rec = vec![
                    r.k_trusted.to_string(),
                    fmt_opt(r.objective),
                    fmt_opt(r.sigma),
                    r.feasible.to_string(),
                ];
                if empirical {
                    rec.extend([fmt_opt(r.mse_empirical), fmt_opt(r.mse_empirical_stderr)]);
                }
                w.write_record(&rec).map_err(to_err)?;
            }
        }
        ResultTable::GoodNodes(rows) => {
            w.write_record([
                "num_good",
                "mse_pricer",
                "mse_pricer_stderr",
                "mse_naive",
                "mse_naive_stderr",
                "trials",
                "seed",
            ])
            .map_err(to_err)?;
            for r in rows {
                w.write_record([
                    r.num_good.to_string(),
                    fmt_opt(r.mse_pricer),
                    fmt_opt(r.mse_pricer_stderr),
                    fmt_opt(r.mse_naive),
                    fmt_opt(r.mse_naive_stderr),
                    r.trials.to_string(),
                    r.seed.to_string(),
                ])
                .map_err(to_err)?;
            }
        }
    }
    w.into_inner().map_err(|e| Error::Io {
        path: PathBuf::from("<memory>"),
        source: e.into_error(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config: ExperimentConfig,
    pub rows: serde_json::Value,
    pub errors: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmittedFiles {
    pub csv: PathBuf,
    pub summary: PathBuf,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = fs::File::create(path).map_err(io)?;
    f.write_all(bytes).map_err(io)
}

/// Writes `<kind>.csv` and `<kind>_summary.json` into `dir`. The summary
/// embeds the fully resolved config.
pub fn emit_results(table: &ResultTable, config: &ExperimentConfig, dir: &Path) -> Result<EmittedFiles> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let stem = config.kind.file_stem();
    let csv = dir.join(format!("{stem}.csv"));
    let summary = dir.join(format!("{stem}_summary.json"));
    write_file(&csv, &table_to_csv(table)?)?;
    let rows = match table {
        ResultTable::Trust(rows) => serde_json::to_value(rows)?,
        ResultTable::GoodNodes(rows) => serde_json::to_value(rows)?,
    };
    let body = Summary {
        config: config.resolved(),
        rows,
        errors: table.error_count(),
    };
    let mut text = serde_json::to_string_pretty(&body)?;
    text.push('\n');
    write_file(&summary, text.as_bytes())?;
    Ok(EmittedFiles { csv, summary })
}
