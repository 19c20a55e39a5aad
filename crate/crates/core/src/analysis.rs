//! Closed-form unbiasedness and MSE bounds.
//!
//! With `x̂ = (1/n) Σ_i τ_i Σ_j τ_ji (α_ji x_j + n_ji)`:
//!
//! ```text
//! E‖x̂ − x̄‖² ≤ R² σ_tv²(A) + σ_pr²(σ)
//! ```
//!
//! All evaluators iterate `i` outer, `j` middle, `l` inner and accumulate with
//! compensated summation.

use serde::{Deserialize, Serialize};

use crate::network::NetworkModel;
use crate::sum::Compensated;
use crate::SquareMatrix;

/// Default tolerance on `max_i |Σ_j p_j p_ij α_ij − 1|`.
pub const UNBIASED_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MseBreakdown {
    /// Topology-induced variance bound `R² σ_tv²`.
    pub tiv_bound: f64,
    /// Privacy-induced variance `σ_pr²`.
    pub piv: f64,
    pub total: f64,
}

/// `|Σ_j p_j p_ij α_ij − 1|` for each row `i`.
pub fn unbiasedness_residual(model: &NetworkModel, alpha: &SquareMatrix) -> Vec<f64> {
    (0..model.n())
        .map(|i| {
            let mut acc = Compensated::default();
            for j in 0..model.n() {
                acc.add(model.relay_prob(i, j) * alpha[(i, j)]);
            }
            (acc.value() - 1.0).abs()
        })
        .collect()
}

pub fn is_unbiased(model: &NetworkModel, alpha: &SquareMatrix, tol: f64) -> bool {
    unbiasedness_residual(model, alpha).iter().all(|&r| r <= tol)
}

/// Which version of the reciprocity term to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ReciprocityTerm {
    /// `α_li α_il`, the actual bound.
    Cross,
    /// `α_il²`, the convex surrogate.
    Square,
}

fn tv_sum(model: &NetworkModel, alpha: &SquareMatrix, term: ReciprocityTerm) -> f64 {
    let n = model.n();
    let p = model.p();
    let mut acc = Compensated::default();
    for i in 0..n {
        for j in 0..n {
            let pij = model.p_link(i, j);
            let base = p[j] * (1.0 - p[j]) * pij * alpha[(i, j)];
            for l in 0..n {
                acc.add(base * model.p_link(l, j) * alpha[(l, j)]);
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            let pij = model.p_link(i, j);
            acc.add(pij * p[j] * (1.0 - pij) * alpha[(i, j)] * alpha[(i, j)]);
        }
    }
    for i in 0..n {
        for l in 0..n {
            let coeff = p[i] * p[l] * (model.e(i, l) - model.p_link(i, l) * model.p_link(l, i));
            let w = match term {
                ReciprocityTerm::Cross => alpha[(l, i)] * alpha[(i, l)],
                ReciprocityTerm::Square => alpha[(i, l)] * alpha[(i, l)],
            };
            acc.add(coeff * w);
        }
    }
    let nf = n as f64;
    acc.value() / (nf * nf)
}

/// Topology-induced variance bound `σ_tv²` (per unit `R²`).
pub fn sigma_tv_sq(model: &NetworkModel, alpha: &SquareMatrix) -> f64 {
    tv_sum(model, alpha, ReciprocityTerm::Cross)
}

/// Convex surrogate `σ̄_tv² ≥ σ_tv²`.
pub fn sigma_tv_sq_bar(model: &NetworkModel, alpha: &SquareMatrix) -> f64 {
    tv_sum(model, alpha, ReciprocityTerm::Square)
}

/// Privacy-induced variance `(1/n²) Σ_ij p_j p_ij σ² d`. Exact, not a bound.
pub fn sigma_pr_sq(model: &NetworkModel, sigma: f64, d: usize) -> f64 {
    let n = model.n();
    let mut acc = Compensated::default();
    for i in 0..n {
        for j in 0..n {
            acc.add(model.relay_prob(i, j));
        }
    }
    let nf = n as f64;
    acc.value() * sigma * sigma * d as f64 / (nf * nf)
}

pub fn mse_upper_bound(model: &NetworkModel, alpha: &SquareMatrix, sigma: f64, d: usize, r: f64) -> MseBreakdown {
    let tiv_bound = r * r * sigma_tv_sq(model, alpha);
    let piv = sigma_pr_sq(model, sigma, d);
    MseBreakdown {
        tiv_bound,
        piv,
        total: tiv_bound + piv,
    }
}
