//! Brute-force ground truth for small networks.
//!
//! [`exact_mse`] enumerates every PS-link pattern and every joint outcome of
//! each node pair, so it involves no bound and no sampling. [`grid_search`]
//! scans the unbiased weight lines of a two-node network.

use crate::analysis::sigma_tv_sq;
use crate::network::NetworkModel;
use crate::privacy::PrivacySpec;
use crate::protocol::DataSet;
use crate::sum::{compensated_sum, Compensated};
use crate::{Error, Result, SquareMatrix};

/// Largest network [`exact_mse`] accepts: `2^4 · 4^6 = 65 536` outcomes.
pub const MAX_EXACT_NODES: usize = 4;
pub const MAX_GRID_RESOLUTION: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactMoments {
    pub exact_mse: f64,
    /// Link-failure part (the `σ = 0` MSE).
    pub exact_tiv: f64,
    /// Noise part.
    pub exact_piv: f64,
}

/// One joint outcome of all unordered pairs with its probability.
fn pair_outcomes(model: &NetworkModel) -> Vec<(f64, Vec<Vec<bool>>)> {
    let n = model.n();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
    let mut out = Vec::with_capacity(1 << (2 * pairs.len()));
    for code in 0..(1usize << (2 * pairs.len())) {
        let mut prob = 1.0;
        let mut tau = vec![vec![true; n]; n];
        for (k, &(i, j)) in pairs.iter().enumerate() {
            let fwd = (code >> (2 * k)) & 1 == 1;
            let bwd = (code >> (2 * k + 1)) & 1 == 1;
            let e = model.e(i, j);
            let (a, b) = (model.p_link(i, j), model.p_link(j, i));
            prob *= match (fwd, bwd) {
                (true, true) => e,
                (true, false) => a - e,
                (false, true) => b - e,
                (false, false) => 1.0 - a - b + e,
            };
            tau[i][j] = fwd;
            tau[j][i] = bwd;
        }
        if prob > 0.0 {
            out.push((prob, tau));
        }
    }
    out
}

/// Exact `E‖x̂ − x̄‖²` over all link outcomes and the Gaussian noise.
///
/// Given a realization, the noise terms that reach the PS are independent
/// `N(0, σ² I_d)` vectors, so they contribute `σ² d · (#delivered) / n²`
/// and are uncorrelated with the signal part.
pub fn exact_mse(model: &NetworkModel, data: &DataSet, alpha: &SquareMatrix, sigma: f64) -> Result<ExactMoments> {
    let n = model.n();
    if n > MAX_EXACT_NODES {
        return Err(Error::TooLarge {
            n,
            max: MAX_EXACT_NODES,
        });
    }
    model.ensure_valid()?;
    if data.n() != n || alpha.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: if data.n() != n { data.n() } else { alpha.n() },
        });
    }
    let d = data.d();
    let nf = n as f64;
    let target = data.mean();
    let mut tiv = Compensated::default();
    let mut delivered = Compensated::default();

    for (pair_prob, tau) in pair_outcomes(model) {
        // Local aggregates without noise, and how many noise terms each holds.
        let mut local = vec![vec![0.0; d]; n];
        let mut count = vec![0usize; n];
        for (i, acc) in local.iter_mut().enumerate() {
            for j in 0..n {
                if tau[j][i] {
                    count[i] += 1;
                    for (a, x) in acc.iter_mut().zip(&data.x[j]) {
                        *a += alpha[(j, i)] * x;
                    }
                }
            }
        }
        for mask in 0..(1usize << n) {
            let mut prob = pair_prob;
            for (i, &p) in model.p().iter().enumerate() {
                prob *= if mask >> i & 1 == 1 { p } else { 1.0 - p };
            }
            if prob == 0.0 {
                continue;
            }
            let mut err = 0.0;
            for k in 0..d {
                let est = compensated_sum((0..n).filter(|i| mask >> i & 1 == 1).map(|i| local[i][k])) / nf;
                err += (est - target[k]) * (est - target[k]);
            }
            tiv.add(prob * err);
            let c: usize = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| count[i]).sum();
            delivered.add(prob * c as f64);
        }
    }
    let exact_tiv = tiv.value();
    let exact_piv = sigma * sigma * d as f64 * delivered.value() / (nf * nf);
    Ok(ExactMoments {
        exact_mse: exact_tiv + exact_piv,
        exact_tiv,
        exact_piv,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridMinimum {
    pub alpha: SquareMatrix,
    pub sigma: f64,
    pub objective: f64,
    pub points_evaluated: usize,
}

/// Values of `α_ii` along row `i`'s unbiased segment; the off-diagonal
/// weight follows from the hyperplane.
fn row_line(model: &NetworkModel, i: usize, resolution: usize) -> Vec<(f64, f64)> {
    let j = 1 - i;
    let self_reach = model.p_ps(i);
    let relay = model.relay_prob(i, j);
    if relay == 0.0 {
        return vec![(1.0 / self_reach, 0.0)];
    }
    let top = 1.0 / self_reach;
    (0..resolution)
        .map(|k| {
            let a_ii = top * k as f64 / (resolution - 1) as f64;
            let a_ij = ((1.0 - self_reach * a_ii) / relay).max(0.0);
            (a_ii, a_ij)
        })
        .collect()
}

/// Smallest noise meeting every link budget for fixed weights; `None` if a
/// positive weight sits on a zero budget.
fn least_noise(spec: &PrivacySpec, alpha: &SquareMatrix) -> Option<f64> {
    let mut sigma: f64 = 0.0;
    for (i, j, a) in alpha.iter() {
        if a > 0.0 {
            let eps = spec.eps[(i, j)];
            if eps == 0.0 {
                return None;
            }
            let factor = (2.0 * (1.25 / spec.delta[(i, j)]).ln()).sqrt();
            sigma = sigma.max(factor * 2.0 * a * spec.r / eps);
        }
    }
    Some(sigma)
}

/// Minimises `R² σ_tv²(A) + (1/n²) Σ p_j p_ij σ² d` over a two-node network.
///
/// Each row's unbiased segment is sampled at `resolution` evenly spaced
/// points (row `i` parametrised by `α_ii ∈ [0, 1/p_i]`). For every weight
/// pair the noise is set to the smallest value the budgets allow, which is
/// exactly optimal in `σ` since the objective increases with `σ`.
pub fn grid_search(model: &NetworkModel, spec: &PrivacySpec, d: usize, resolution: usize) -> Result<GridMinimum> {
    if model.n() != 2 {
        return Err(Error::Config(format!("grid search needs n = 2, got {}", model.n())));
    }
    if !(2..=MAX_GRID_RESOLUTION).contains(&resolution) {
        return Err(Error::Config(format!(
            "grid resolution {resolution} outside [2, {MAX_GRID_RESOLUTION}]"
        )));
    }
    model.ensure_valid()?;
    let reach_total: f64 = (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| model.relay_prob(i, j)).sum();
    let piv_per_var = reach_total * d as f64 / 4.0;
    let r2 = spec.r * spec.r;

    let rows = [row_line(model, 0, resolution), row_line(model, 1, resolution)];
    let mut best: Option<GridMinimum> = None;
    let mut evaluated = 0;
    for &(a00, a01) in &rows[0] {
        for &(a11, a10) in &rows[1] {
            let alpha = SquareMatrix::from_rows(vec![vec![a00, a01], vec![a10, a11]]).expect("2x2");
            evaluated += 1;
            let Some(sigma) = least_noise(spec, &alpha) else {
                continue;
            };
            let value = r2 * sigma_tv_sq(model, &alpha) + piv_per_var * sigma * sigma;
            if best.as_ref().is_none_or(|b| value < b.objective) {
                best = Some(GridMinimum {
                    alpha,
                    sigma,
                    objective: value,
                    points_evaluated: 0,
                });
            }
        }
    }
    let mut best = best.ok_or(Error::EmptyGrid)?;
    best.points_evaluated = evaluated;
    Ok(best)
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;
    use crate::network::erdos_renyi_model;

    #[test]
    fn single_node_two_outcomes() {
        let model = erdos_renyi_model(1, 0.0, vec![0.5]).unwrap();
        let data = DataSet::new(vec![vec![0.6, 0.8]]).unwrap();
        let m = exact_mse(&model, &data, &SquareMatrix::diagonal(&[2.0]), 0.0).unwrap();
        // 0.5‖2x − x‖² + 0.5‖x‖²
        assert_relative_eq!(m.exact_mse, 1.0, max_relative = 1e-14);
        assert_eq!(m.exact_piv, 0.0);
    }

    #[test]
    fn perfect_network_exact() {
        let model = erdos_renyi_model(3, 1.0, vec![1.0; 3]).unwrap();
        let data = DataSet::new(vec![vec![0.1], vec![0.5], vec![-0.3]]).unwrap();
        let m = exact_mse(&model, &data, &SquareMatrix::identity(3), 0.0).unwrap();
        assert!(m.exact_mse < 1e-30);
    }

    #[test]
    fn decomposition_identity() {
        let model = erdos_renyi_model(2, 0.7, vec![0.4, 0.8]).unwrap();
        let data = DataSet::new(vec![vec![0.3, -0.2, 0.1], vec![0.0, 0.5, 0.5]]).unwrap();
        let a = SquareMatrix::from_rows(vec![vec![1.0, 1.0], vec![0.5, 0.8]]).unwrap();
        let m = exact_mse(&model, &data, &a, 0.7).unwrap();
        assert_eq!(m.exact_mse, m.exact_tiv + m.exact_piv);
        assert!(m.exact_piv > 0.0);
    }

    #[test]
    fn refuses_large_networks() {
        let model = erdos_renyi_model(5, 0.5, vec![0.5; 5]).unwrap();
        let data = DataSet::new(vec![vec![0.0]; 5]).unwrap();
        assert!(matches!(
            exact_mse(&model, &data, &SquareMatrix::identity(5), 0.0),
            Err(Error::TooLarge { n: 5, max: 4 })
        ));
    }

    #[test]
    fn pair_outcomes_sum_to_one() {
        let link = SquareMatrix::from_rows(vec![
            vec![1.0, 0.3, 0.6],
            vec![0.7, 1.0, 0.2],
            vec![0.9, 0.5, 1.0],
        ])
        .unwrap();
        let mut rec = crate::network::independent_reciprocity(&link);
        rec[(0, 1)] = 0.3;
        rec[(1, 0)] = 0.3;
        let model = NetworkModel::new(vec![0.5; 3], link, rec).unwrap();
        assert!(model.validate().is_empty());
        let total: f64 = pair_outcomes(&model).iter().map(|(p, _)| p).sum();
        assert_relative_eq!(total, 1.0, max_relative = 1e-14);
    }

    #[test]
    fn grid_perfect_network_uses_threshold_noise() {
        let model = erdos_renyi_model(2, 1.0, vec![1.0, 1.0]).unwrap();
        let spec = PrivacySpec::uniform(2, 1.0, 1.0, 1.0, 1e-3);
        let g = grid_search(&model, &spec, 4, MAX_GRID_RESOLUTION).unwrap();
        let thr = crate::optimizer::sigma_threshold(&model, &spec).unwrap();
        assert!(g.sigma >= thr * (1.0 - 1e-12));
        assert!(g.sigma <= thr * 1.02, "sigma {} thr {}", g.sigma, thr);
        assert!(crate::analysis::is_unbiased(&model, &g.alpha, 1e-12));
    }

    #[test]
    fn refinement_never_worse() {
        let model = erdos_renyi_model(2, 0.6, vec![0.3, 0.7]).unwrap();
        let spec = PrivacySpec::uniform(2, 1.0, 2.0, 5.0, 1e-3);
        let coarse = grid_search(&model, &spec, 8, 51).unwrap();
        let fine = grid_search(&model, &spec, 8, 101).unwrap();
        assert!(fine.objective <= coarse.objective);
    }

    #[test]
    fn grid_rejects_bad_inputs() {
        let model = erdos_renyi_model(3, 0.6, vec![0.3, 0.7, 0.5]).unwrap();
        let spec = PrivacySpec::uniform(3, 1.0, 2.0, 5.0, 1e-3);
        assert!(grid_search(&model, &spec, 8, 50).is_err());
        let model = erdos_renyi_model(2, 0.6, vec![0.3, 0.7]).unwrap();
        let spec = PrivacySpec::uniform(2, 1.0, 2.0, 5.0, 1e-3);
        assert!(grid_search(&model, &spec, 8, 201).is_err());
    }
}
