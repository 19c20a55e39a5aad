//! Gaussian mechanism and per-link privacy accounting.
//!
//! A transmission `τ_ij (α_ij x_i + n_ij)` with `n_ij ~ N(0, σ² I_d)` and
//! `‖x_i‖ ≤ R` is `(ε_ij, p_ij δ_ij)`-DP with
//!
//! ```text
//! ε_ij = sqrt(2 ln(1.25 / δ_ij)) · 2 α_ij R / σ      (p_ij > 0)
//! ε_ij = 0                                            (p_ij = 0)
//! ```
//!
//! The failure probability shrinks by the link probability because nothing
//! is observable when the link is down.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::network::NetworkModel;
use crate::{Error, Result, SquareMatrix};

/// Per-ordered-pair privacy budgets `(ε̲_ij, δ̲_ij)` and the data norm bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacySpec {
    pub r: f64,
    pub eps: SquareMatrix,
    pub delta: SquareMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpGuarantee {
    pub epsilon: f64,
    /// Effective failure probability `p_ij · δ_ij`.
    pub delta: f64,
}

/// `sqrt(2 ln(1.25 / δ))`, the Gaussian-mechanism calibration factor.
pub fn gaussian_factor(delta: f64) -> f64 {
    (2.0 * (1.25 / delta).ln()).sqrt()
}

pub fn l2_sensitivity(alpha: f64, r: f64) -> f64 {
    2.0 * alpha * r
}

pub fn achieved_epsilon(alpha: f64, r: f64, sigma: f64, delta: f64, p_link: f64) -> Result<DpGuarantee> {
    if p_link == 0.0 || alpha == 0.0 {
        return Ok(DpGuarantee {
            epsilon: 0.0,
            delta: p_link * delta,
        });
    }
    if sigma <= 0.0 {
        return Err(Error::ZeroNoise { alpha });
    }
    Ok(DpGuarantee {
        epsilon: gaussian_factor(delta) * l2_sensitivity(alpha, r) / sigma,
        delta: p_link * delta,
    })
}

/// Largest weight `w̃` for which the link stays within `eps_budget` at noise `sigma`.
pub fn weight_cap(eps_budget: f64, delta_budget: f64, sigma: f64, r: f64) -> f64 {
    if sigma == 0.0 || eps_budget == 0.0 {
        return 0.0;
    }
    eps_budget * sigma / (2.0 * r * gaussian_factor(delta_budget))
}

/// Draws `d` i.i.d. `N(0, σ²)` entries. Always consumes `d` normals so the
/// stream layout does not depend on `sigma`.
pub fn sample_noise<R: Rng + ?Sized>(sigma: f64, d: usize, rng: &mut R) -> Vec<f64> {
    (0..d)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            if sigma == 0.0 {
                0.0
            } else {
                sigma * z
            }
        })
        .collect()
}

impl PrivacySpec {
    /// Same budget on every ordered pair, with a separate diagonal budget.
    pub fn uniform(n: usize, r: f64, eps_offdiag: f64, eps_diag: f64, delta: f64) -> Self {
        Self {
            r,
            eps: SquareMatrix::from_fn(n, |i, j| if i == j { eps_diag } else { eps_offdiag }),
            delta: SquareMatrix::filled(n, delta),
        }
    }

    pub fn n(&self) -> usize {
        self.eps.n()
    }

    /// Per-link weight caps `w̃_ij(σ)`.
    pub fn caps(&self, sigma: f64) -> SquareMatrix {
        SquareMatrix::from_fn(self.n(), |i, j| {
            weight_cap(self.eps[(i, j)], self.delta[(i, j)], sigma, self.r)
        })
    }

    /// Coefficient `c_ij` with `w̃_ij = c_ij σ`.
    pub fn cap_slope(&self, i: usize, j: usize) -> f64 {
        weight_cap(self.eps[(i, j)], self.delta[(i, j)], 1.0, self.r)
    }

    /// Checks the spec against `model`; returns non-fatal warnings.
    pub fn validate(&self, model: &NetworkModel) -> Result<Vec<String>> {
        let n = model.n();
        if self.eps.n() != n || self.delta.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: self.eps.n().min(self.delta.n()),
            });
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::InvalidPrivacySpec(format!("R = {} must be positive", self.r)));
        }
        let mut warnings = Vec::new();
        for (i, j, d) in self.delta.iter() {
            if !(d > 0.0 && d <= 1.0) {
                return Err(Error::InvalidPrivacySpec(format!(
                    "delta_{}{} = {d} outside (0, 1]",
                    i + 1,
                    j + 1
                )));
            }
            if d == 1.0 {
                warnings.push(format!("delta_{}{} = 1 gives a vacuous guarantee", i + 1, j + 1));
            }
        }
        for (i, j, e) in self.eps.iter() {
            if !(e >= 0.0 && e.is_finite()) {
                return Err(Error::InvalidPrivacySpec(format!(
                    "eps_{}{} = {e} must be finite and nonnegative",
                    i + 1,
                    j + 1
                )));
            }
            if e == 0.0 && model.relay_prob(i, j) > 0.0 {
                return Err(Error::InvalidPrivacySpec(format!(
                    "eps_{}{} = 0 on a link with p_j p_ij > 0",
                    i + 1,
                    j + 1
                )));
            }
        }
        Ok(warnings)
    }

    /// Achieved guarantee on every ordered pair for `(alpha, sigma)`.
    pub fn guarantees(&self, model: &NetworkModel, alpha: &SquareMatrix, sigma: f64) -> Result<SquareMatrix> {
        let n = model.n();
        let mut out = SquareMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = achieved_epsilon(alpha[(i, j)], self.r, sigma, self.delta[(i, j)], model.p_link(i, j))?
                    .epsilon;
            }
        }
        Ok(out)
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            r: self.r,
            eps: self.eps.permuted(perm),
            delta: self.delta.permuted(perm),
        }
    }
}
