use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use pricer::experiments::{
    data_rng, emit_results, generate_heavy_tailed_data, run_experiment, ExperimentConfig, ExperimentKind,
};
use pricer::optimizer::{optimize, WeightSolution};
use pricer::protocol::run_monte_carlo;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "pricer", version, about = "Private collaborative mean estimation over intermittent links")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimised objective as the trust radius grows.
    TrustSweep(Common),
    /// Empirical MSE of PriCER and the naive scheme as good uplinks are added.
    GoodNodesSweep(Common),
    /// Optimise weights and noise for the configured network; prints JSON.
    Optimize {
        #[command(flatten)]
        common: Common,
        /// Trust radius; defaults to `privacy.trusted_neighbors`.
        #[arg(long)]
        trusted: Option<usize>,
    },
    /// Monte-Carlo MSE for a solution (optimised first if none is given).
    Simulate {
        #[command(flatten)]
        common: Common,
        /// JSON file written by `optimize`, or a bare `{alpha, sigma}` object.
        #[arg(long)]
        solution: Option<PathBuf>,
        #[arg(long)]
        trusted: Option<usize>,
    },
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; defaults apply to anything omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (required unless the config has one).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for sweeps, output file for `optimize`/`simulate`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
}

impl Common {
    fn load(&self, kind: Option<ExperimentKind>) -> Result<ExperimentConfig> {
        let mut doc: Value = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => json!({}),
        };
        let Some(obj) = doc.as_object_mut() else {
            bail!("config must be a JSON object");
        };
        if let Some(kind) = kind {
            obj.insert("kind".into(), serde_json::to_value(kind)?);
        } else {
            obj.entry("kind").or_insert(json!("custom"));
        }
        if let Some(seed) = self.seed {
            obj.insert("master_seed".into(), json!(seed));
        }
        if let Some(trials) = self.trials {
            obj.insert("trials".into(), json!(trials));
        }
        if !obj.contains_key("master_seed") {
            bail!("no master seed: pass --seed or set master_seed in the config");
        }
        let config = ExperimentConfig::from_json(&doc.to_string())?;
        config.validate()?;
        Ok(config)
    }
}

fn write_or_print(out: Option<&Path>, value: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn sweep(common: &Common, kind: ExperimentKind) -> Result<ExitCode> {
    let config = common.load(Some(kind))?;
    let dir = common
        .out
        .clone()
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("results"));
    let table = run_experiment(&config)?;
    let files = emit_results(&table, &config, &dir)?;
    eprintln!("wrote {} and {}", files.csv.display(), files.summary.display());
    let errors = table.error_count();
    if errors > 0 {
        eprintln!("{errors} sweep point(s) failed; see the summary for messages");
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn solve(config: &ExperimentConfig, trusted: Option<usize>) -> Result<(pricer::network::NetworkModel, Value, WeightSolution)> {
    let model = config.model()?;
    let spec = config.privacy_spec(trusted.unwrap_or(config.privacy.trusted_neighbors));
    for warning in spec.validate(&model)? {
        eprintln!("warning: {warning}");
    }
    let report = optimize(&model, &spec, config.data.d, &config.optimizer_config())?;
    report.solution.check(&model, &spec)?;
    let value = serde_json::to_value(&report)?;
    Ok((model, value, report.solution))
}

fn load_solution(path: &Path) -> Result<WeightSolution> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let inner = value.get("solution").cloned().unwrap_or(value);
    serde_json::from_value(inner).with_context(|| format!("{} holds no weight solution", path.display()))
}

fn simulate(common: &Common, solution: Option<&Path>, trusted: Option<usize>) -> Result<()> {
    let config = common.load(None)?;
    let (model, solution) = match solution {
        Some(path) => {
            let sol = load_solution(path)?;
            let model = config.model()?;
            let spec = config.privacy_spec(trusted.unwrap_or(config.privacy.trusted_neighbors));
            sol.check(&model, &spec).context("solution is infeasible for this config")?;
            (model, sol)
        }
        None => {
            let (model, _, sol) = solve(&config, trusted)?;
            (model, sol)
        }
    };
    let r = config.privacy.r;
    let data = generate_heavy_tailed_data(model.n(), config.data.d, r, &mut data_rng(config.master_seed));
    data.check_norms(r)?;
    let mc = run_monte_carlo(&model, &data, &solution.alpha, solution.sigma, config.trials, config.master_seed)?;
    let out = json!({
        "pricer": mc.pricer,
        "naive": mc.naive,
        "trials": config.trials,
        "seed": config.master_seed,
        "sigma": solution.sigma,
    });
    write_or_print(common.out.as_deref(), &out)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::TrustSweep(common) => sweep(&common, ExperimentKind::TrustSweep),
        Command::GoodNodesSweep(common) => sweep(&common, ExperimentKind::GoodNodesSweep),
        Command::Optimize { common, trusted } => {
            let config = common.load(None)?;
            let (_, report, _) = solve(&config, trusted)?;
            write_or_print(common.out.as_deref(), &report)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate {
            common,
            solution,
            trusted,
        } => {
            simulate(&common, solution.as_deref(), trusted)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
