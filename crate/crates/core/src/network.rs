//! Intermittent-connectivity topology.
//!
//! Node `i` reaches the PS with probability `p[i]` and reaches node `j` with
//! probability `P[(i, j)]`. The two directions of a node pair may be
//! correlated (channel reciprocity); `E[(i, j)]` is the probability that both
//! `i → j` and `j → i` succeed.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, SquareMatrix};

/// Slack used when comparing probabilities that are products of config literals.
const PROB_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkModel {
    /// Node → PS success probabilities.
    p: Vec<f64>,
    /// Node → node success probabilities, row = sender.
    link: SquareMatrix,
    /// Reciprocity: `E[(i, j)] = E[τ_ij τ_ji]`.
    reciprocity: SquareMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    ProbabilityRange { what: String, value: f64 },
    NonPositivePs { node: usize, value: f64 },
    SelfLink { node: usize, value: f64 },
    SelfReciprocity { node: usize, value: f64 },
    Asymmetric { i: usize, j: usize, e_ij: f64, e_ji: f64 },
    BelowIndependence { i: usize, j: usize, e: f64, product: f64 },
    FrechetLower { i: usize, j: usize, e: f64, bound: f64 },
    FrechetUpper { i: usize, j: usize, e: f64, bound: f64 },
}

impl fmt::Display for Violation {
    // Indices are reported 1-based to match the usual p_12 notation.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::ProbabilityRange { ref what, value } => {
                write!(f, "{what} = {value} outside [0, 1]")
            }
            Violation::NonPositivePs { node, value } => {
                write!(f, "p_{} = {value} not allowed (must be > 0)", node + 1)
            }
            Violation::SelfLink { node, value } => {
                write!(f, "p_{0}{0} = {value} but self-links must have probability 1", node + 1)
            }
            Violation::SelfReciprocity { node, value } => {
                write!(f, "E_{{{0},{0}}} = {value} but must be 1", node + 1)
            }
            Violation::Asymmetric { i, j, e_ij, e_ji } => write!(
                f,
                "E not symmetric: E_{{{},{}}} = {e_ij} but E_{{{},{}}} = {e_ji}",
                i + 1,
                j + 1,
                j + 1,
                i + 1
            ),
            Violation::BelowIndependence { i, j, e, product } => write!(
                f,
                "E_{{{0},{1}}} = {e} < p_{0}{1}·p_{1}{0} = {product}",
                i + 1,
                j + 1
            ),
            Violation::FrechetLower { i, j, e, bound } => write!(
                f,
                "E_{{{0},{1}}} = {e} < p_{0}{1} + p_{1}{0} - 1 = {bound}",
                i + 1,
                j + 1
            ),
            Violation::FrechetUpper { i, j, e, bound } => write!(
                f,
                "E_{{{0},{1}}} = {e} > min(p_{0}{1}, p_{1}{0}) = {bound}",
                i + 1,
                j + 1
            ),
        }
    }
}

/// One draw of every Bernoulli link indicator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkRealization {
    /// `tau_ps[i]`: node `i` reached the PS.
    pub tau_ps: Vec<bool>,
    /// `tau_nn[i][j]`: node `i` reached node `j`. Diagonal is always `true`.
    pub tau_nn: Vec<Vec<bool>>,
}

impl LinkRealization {
    pub fn all_connected(n: usize) -> Self {
        Self {
            tau_ps: vec![true; n],
            tau_nn: vec![vec![true; n]; n],
        }
    }

    pub fn n(&self) -> usize {
        self.tau_ps.len()
    }
}

fn in_unit(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

impl NetworkModel {
    /// Builds a model after checking shapes. Probabilistic assumptions are
    /// checked separately by [`NetworkModel::validate`].
    pub fn new(p: Vec<f64>, link: SquareMatrix, reciprocity: SquareMatrix) -> Result<Self> {
        let n = p.len();
        if n == 0 {
            return Err(Error::InvalidModel("node count must be positive".into()));
        }
        for m in [&link, &reciprocity] {
            if m.n() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: m.n(),
                });
            }
        }
        Ok(Self { p, link, reciprocity })
    }

    /// Model with independent link directions: `E_ij = p_ij p_ji`, `E_ii = 1`.
    pub fn with_independent_links(p: Vec<f64>, link: SquareMatrix) -> Result<Self> {
        let reciprocity = independent_reciprocity(&link);
        Self::new(p, link, reciprocity)
    }

    pub fn n(&self) -> usize {
        self.p.len()
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn p_ps(&self, i: usize) -> f64 {
        self.p[i]
    }

    pub fn link(&self) -> &SquareMatrix {
        &self.link
    }

    pub fn p_link(&self, i: usize, j: usize) -> f64 {
        self.link[(i, j)]
    }

    pub fn reciprocity(&self) -> &SquareMatrix {
        &self.reciprocity
    }

    pub fn e(&self, i: usize, j: usize) -> f64 {
        self.reciprocity[(i, j)]
    }

    /// Probability that a copy of `i`'s data relayed through `j` reaches the PS.
    pub fn relay_prob(&self, i: usize, j: usize) -> f64 {
        self.p[j] * self.link[(i, j)]
    }

    /// Applies a node relabelling: new node `a` is old node `perm[a]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            p: perm.iter().map(|&k| self.p[k]).collect(),
            link: self.link.permuted(perm),
            reciprocity: self.reciprocity.permuted(perm),
        }
    }

    /// Lists every violated modelling assumption. Empty means valid.
    pub fn validate(&self) -> Vec<Violation> {
        let n = self.n();
        let mut out = Vec::new();
        for (i, &pi) in self.p.iter().enumerate() {
            if !in_unit(pi) {
                out.push(Violation::ProbabilityRange {
                    what: format!("p_{}", i + 1),
                    value: pi,
                });
            } else if pi <= 0.0 {
                out.push(Violation::NonPositivePs { node: i, value: pi });
            }
        }
        for (i, j, v) in self.link.iter() {
            if !in_unit(v) {
                out.push(Violation::ProbabilityRange {
                    what: format!("p_{}{}", i + 1, j + 1),
                    value: v,
                });
            }
        }
        for i in 0..n {
            if self.link[(i, i)] != 1.0 {
                out.push(Violation::SelfLink {
                    node: i,
                    value: self.link[(i, i)],
                });
            }
            if self.reciprocity[(i, i)] != 1.0 {
                out.push(Violation::SelfReciprocity {
                    node: i,
                    value: self.reciprocity[(i, i)],
                });
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let (e_ij, e_ji) = (self.reciprocity[(i, j)], self.reciprocity[(j, i)]);
                if e_ij != e_ji {
                    out.push(Violation::Asymmetric { i, j, e_ij, e_ji });
                }
                let (a, b) = (self.link[(i, j)], self.link[(j, i)]);
                let e = e_ij;
                if !in_unit(e) {
                    out.push(Violation::ProbabilityRange {
                        what: format!("E_{{{},{}}}", i + 1, j + 1),
                        value: e,
                    });
                }
                let product = a * b;
                if e < product - PROB_TOL {
                    out.push(Violation::BelowIndependence { i, j, e, product });
                }
                let lower = (a + b - 1.0).max(0.0);
                if e < lower - PROB_TOL {
                    out.push(Violation::FrechetLower { i, j, e, bound: lower });
                }
                let upper = a.min(b);
                if e > upper + PROB_TOL {
                    out.push(Violation::FrechetUpper { i, j, e, bound: upper });
                }
            }
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let violations = self.validate();
        if violations.is_empty() {
            Ok(())
        } else {
            let msgs: Vec<String> = violations.iter().map(ToString::to_string).collect();
            Err(Error::InvalidModel(msgs.join("; ")))
        }
    }

    /// Draws one realization of all links. Rejects invalid models.
    pub fn sample_links<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<LinkRealization> {
        self.ensure_valid()?;
        Ok(self.sample_links_unchecked(rng))
    }

    /// Consumes exactly `n + n(n-1)/2` uniforms in a fixed order: PS links by
    /// node, then unordered pairs `(i, j), i < j`, row by row.
    pub(crate) fn sample_links_unchecked<R: Rng + ?Sized>(&self, rng: &mut R) -> LinkRealization {
        let n = self.n();
        let tau_ps = self.p.iter().map(|&pi| rng.random::<f64>() < pi).collect();
        let mut tau_nn = vec![vec![true; n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let (fwd, bwd) = self.sample_pair(i, j, rng.random::<f64>());
                tau_nn[i][j] = fwd;
                tau_nn[j][i] = bwd;
            }
        }
        LinkRealization { tau_ps, tau_nn }
    }

    /// Maps a uniform onto the joint pmf of `(τ_ij, τ_ji)`:
    /// `(1,1)` w.p. `E`, `(1,0)` w.p. `p_ij - E`, `(0,1)` w.p. `p_ji - E`.
    fn sample_pair(&self, i: usize, j: usize, u: f64) -> (bool, bool) {
        let e = self.reciprocity[(i, j)];
        let a = self.link[(i, j)];
        let b = self.link[(j, i)];
        if u < e {
            (true, true)
        } else if u < a {
            (true, false)
        } else if u < a + b - e {
            (false, true)
        } else {
            (false, false)
        }
    }
}

pub fn independent_reciprocity(link: &SquareMatrix) -> SquareMatrix {
    SquareMatrix::from_fn(link.n(), |i, j| {
        if i == j {
            1.0
        } else {
            link[(i, j)] * link[(j, i)]
        }
    })
}

/// Complete topology with `P_ij = p_c` off the diagonal and independent
/// link directions.
pub fn erdos_renyi_model(n: usize, p_c: f64, p: Vec<f64>) -> Result<NetworkModel> {
    if !in_unit(p_c) {
        return Err(Error::Probability {
            name: "p_c".into(),
            value: p_c,
        });
    }
    if p.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: p.len(),
        });
    }
    for (i, &pi) in p.iter().enumerate() {
        if !(pi > 0.0 && pi <= 1.0) {
            return Err(Error::Probability {
                name: format!("p_{}", i + 1),
                value: pi,
            });
        }
    }
    let link = SquareMatrix::from_fn(n, |i, j| if i == j { 1.0 } else { p_c });
    NetworkModel::with_independent_links(p, link)
}
