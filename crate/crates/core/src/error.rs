use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network model: {0}")]
    InvalidModel(String),

    #[error("invalid privacy spec: {0}")]
    InvalidPrivacySpec(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("data vector {node} has norm {norm} exceeding bound {bound}")]
    NormBound { node: usize, norm: f64, bound: f64 },

    #[error("probability {name} = {value} outside [0, 1]")]
    Probability { name: String, value: f64 },

    #[error("privacy guarantee undefined: sigma = 0 with weight {alpha} > 0")]
    ZeroNoise { alpha: f64 },

    #[error("row {row} is infeasible: sum of p_j p_ij eps_ij is zero")]
    InfeasibleThreshold { row: usize },

    #[error("row {row} cannot reach the unbiasedness hyperplane (deficit {deficit:e})")]
    InfeasibleRow { row: usize, deficit: f64 },

    #[error("weight alpha[{row}][{col}] = {alpha} > 0 but eps budget is zero")]
    ZeroBudget { row: usize, col: usize, alpha: f64 },

    #[error("infeasible solution: {0}")]
    InfeasibleSolution(String),

    #[error("trial count must be at least 1")]
    NoTrials,

    #[error("instance too large for exhaustive enumeration: n = {n} > {max}")]
    TooLarge { n: usize, max: usize },

    #[error("grid search found no feasible point")]
    EmptyGrid,

    #[error("invalid config: {0}")]
    Config(String),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error at {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
