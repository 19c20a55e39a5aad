//! Collaborative mean estimation over intermittently connected networks with
//! peer-to-peer local differential privacy.
//!
//! Nodes relay noisy, scaled copies of their vectors to neighbours over
//! unreliable links; every node then forwards its local aggregate to a
//! parameter server (PS) which may or may not receive it. The crate covers
//! the whole pipeline:
//!
//! - [`network`]: Bernoulli link model with reciprocity correlation.
//! - [`privacy`]: Gaussian mechanism, per-link (ε, δ) accounting and weight caps.
//! - [`protocol`]: the two-stage relay/aggregate protocol and the naïve baseline.
//! - [`analysis`]: closed-form unbiasedness residuals and MSE bounds.
//! - [`optimizer`]: alternating minimisation of weights and noise level.
//! - [`oracle`]: exhaustive enumeration and grid search for small instances.
//! - [`experiments`]: config-driven sweeps with CSV/JSON output.

pub mod analysis;
pub mod error;
pub mod experiments;
pub mod matrix;
pub mod network;
pub mod optimizer;
pub mod oracle;
pub mod privacy;
pub mod protocol;
mod sum;

pub use error::{Error, Result};
pub use matrix::SquareMatrix;
