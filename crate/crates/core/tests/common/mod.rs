#![allow(dead_code)]

use pricer::network::NetworkModel;
use pricer::privacy::PrivacySpec;
use pricer::protocol::DataSet;
use pricer::SquareMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Valid model with random PS and link probabilities (some links dead,
/// some perfect) and reciprocity drawn uniformly inside its feasible range.
pub fn random_model<R: Rng>(n: usize, rng: &mut R) -> NetworkModel {
    let p: Vec<f64> = (0..n)
        .map(|_| if rng.random_bool(0.1) { 1.0 } else { rng.random_range(0.05..1.0) })
        .collect();
    let link = SquareMatrix::from_fn(n, |i, j| {
        if i == j {
            1.0
        } else {
            match rng.random_range(0..10) {
                0 => 0.0,
                1 => 1.0,
                _ => rng.random_range(0.0..1.0),
            }
        }
    });
    let mut rec = SquareMatrix::identity(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (link[(i, j)], link[(j, i)]);
            let lo = a * b;
            let hi = a.min(b);
            let e = if rng.random_bool(0.3) { lo } else { lo + (hi - lo) * rng.random::<f64>() };
            rec[(i, j)] = e;
            rec[(j, i)] = e;
        }
    }
    let model = NetworkModel::new(p, link, rec).unwrap();
    assert!(model.validate().is_empty(), "{:?}", model.validate());
    model
}

/// Nonnegative weights on live relays, rescaled so every row is unbiased.
pub fn random_unbiased_weights<R: Rng>(model: &NetworkModel, rng: &mut R) -> SquareMatrix {
    let n = model.n();
    let mut a = SquareMatrix::from_fn(n, |i, j| {
        if model.relay_prob(i, j) > 0.0 {
            rng.random_range(0.0..1.0)
        } else {
            0.0
        }
    });
    for i in 0..n {
        // The self relay is always live since p_i > 0.
        a[(i, i)] += 0.05;
        let mass: f64 = (0..n).map(|j| model.relay_prob(i, j) * a[(i, j)]).sum();
        for j in 0..n {
            a[(i, j)] /= mass;
        }
    }
    a
}

pub fn random_nonneg_weights<R: Rng>(n: usize, rng: &mut R) -> SquareMatrix {
    SquareMatrix::from_fn(n, |_, _| rng.random_range(0.0..2.0))
}

/// Random per-link budgets: generous self budgets, mixed relay budgets.
pub fn random_spec<R: Rng>(n: usize, rng: &mut R) -> PrivacySpec {
    PrivacySpec {
        r: 1.0,
        eps: SquareMatrix::from_fn(n, |i, j| {
            if i == j {
                rng.random_range(1.0..100.0)
            } else {
                rng.random_range(0.1..10.0)
            }
        }),
        delta: SquareMatrix::from_fn(n, |_, _| 10f64.powf(rng.random_range(-5.0..-1.0))),
    }
}

/// Every node holds the same unit-direction vector of norm `r`.
pub fn collinear_data<R: Rng>(n: usize, d: usize, r: f64, rng: &mut R) -> DataSet {
    let mut v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x *= r / len);
    DataSet::new(vec![v; n]).unwrap()
}

pub fn random_data<R: Rng>(n: usize, d: usize, r: f64, rng: &mut R) -> DataSet {
    let x = (0..n)
        .map(|_| {
            let mut v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let scale = r * rng.random_range(0.1..1.0) / len;
            v.iter_mut().for_each(|x| *x *= scale);
            v
        })
        .collect();
    DataSet::new(x).unwrap()
}
