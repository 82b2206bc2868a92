use rand::Rng as _;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use super::family::{Conditional, FamilyModel};
use super::network::BayesNet;
use super::{dirichlet, sigmoid};
use crate::dag::Dag;
use crate::rng::{self, Rng};
use crate::{Error, Result};

/// CPTs with more parent configurations than this are refused.
pub const MAX_TABLE_ROWS: usize = 1 << 20;

const TAG_CPT: u64 = 1;
const TAG_GAUSSIAN: u64 = 2;
const TAG_LOGISTIC: u64 = 3;
const TAG_SHARED: u64 = 4;

/// How a parameter map spreads its draws over the admissible set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamPolicy {
    /// Dirichlet CPT rows, uniform weights in the ball, uniform shared scalars.
    #[default]
    Random,
    /// Boundary draws: CPT rows at a vertex of the floored simplex, weights on
    /// the sphere of the admissible ball, the largest mean and smallest σ.
    Extreme,
}

/// Materialised parameters of one node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NodeParams {
    /// One row per parent configuration; the lowest-index parent is the most
    /// significant digit.
    Table { rows: Vec<Vec<f64>> },
    /// Linear weights on the parents, in ascending parent order.
    Weights { weights: Vec<f64> },
    /// Noisy-OR: everything is carried by the shared `θ`.
    Shared,
}

/// A deterministic rule assigning parameters to any DAG.
///
/// Each node's parameters depend only on the seed, the node and its parent
/// set (and, for Gaussian weights, the node's topological position, which
/// sets the admissible radius), so two graphs that agree on a node's parents
/// also agree on its conditional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamMap {
    pub family: FamilyModel,
    pub seed: u64,
    #[serde(default)]
    pub policy: ParamPolicy,
    #[serde(default = "default_alpha")]
    pub dirichlet_alpha: f64,
}

fn default_alpha() -> f64 {
    1.0
}

impl ParamMap {
    pub fn new(family: FamilyModel, seed: u64) -> Result<Self> {
        let pm = ParamMap {
            family,
            seed,
            policy: ParamPolicy::Random,
            dirichlet_alpha: default_alpha(),
        };
        pm.validate()?;
        Ok(pm)
    }

    pub fn with_policy(mut self, policy: ParamPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.family.validate()?;
        if !(self.dirichlet_alpha > 0.0 && self.dirichlet_alpha.is_finite()) {
            return Err(Error::Hyperparameter(format!(
                "dirichlet_alpha must be positive, got {}",
                self.dirichlet_alpha
            )));
        }
        Ok(())
    }

    /// Shared Gaussian `(μ, σ)`; `None` for other families.
    pub fn gaussian_shared(&self) -> Option<(f64, f64)> {
        let FamilyModel::Gaussian {
            mu_a,
            mu_b,
            sigma_min,
            sigma_max,
            ..
        } = self.family
        else {
            return None;
        };
        Some(match self.policy {
            ParamPolicy::Extreme => (if mu_a.abs() > mu_b.abs() { mu_a } else { mu_b }, sigma_min),
            ParamPolicy::Random => {
                let mut r = rng::derived_rng(self.seed, &[TAG_SHARED]);
                (uniform(&mut r, mu_a, mu_b), uniform(&mut r, sigma_min, sigma_max))
            }
        })
    }

    /// Parameters of `node` with parent set `parent_mask`; `topo_pos` is the
    /// node's 1-based topological position (only Gaussian weights use it).
    pub fn node_params(&self, node: usize, parent_mask: u64, topo_pos: usize) -> Result<NodeParams> {
        let k = parent_mask.count_ones() as usize;
        let path = |tag: u64| [tag, node as u64, parent_mask];
        Ok(match self.family {
            FamilyModel::Cpt { v, theta_min } => {
                let rows = checked_rows(v, k)?;
                let mut r = rng::derived_rng(self.seed, &path(TAG_CPT));
                NodeParams::Table {
                    rows: (0..rows).map(|_| self.cpt_row(&mut r, v, theta_min)).collect(),
                }
            }
            FamilyModel::Gaussian { .. } => {
                if k == 0 {
                    NodeParams::Weights { weights: Vec::new() }
                } else {
                    if topo_pos < 2 {
                        return Err(Error::InvalidDag(format!(
                            "node {node} has parents but topological position {topo_pos}"
                        )));
                    }
                    let radius = 1.0 / (2.0 * (topo_pos - 1) as f64).sqrt();
                    let mut p = path(TAG_GAUSSIAN).to_vec();
                    p.push(topo_pos as u64);
                    let mut r = rng::derived_rng(self.seed, &p);
                    NodeParams::Weights {
                        weights: self.l2_weights(&mut r, k, radius),
                    }
                }
            }
            FamilyModel::Logistic { w_max_1 } => {
                let mut r = rng::derived_rng(self.seed, &path(TAG_LOGISTIC));
                NodeParams::Weights {
                    weights: self.l1_weights(&mut r, k, w_max_1),
                }
            }
            FamilyModel::NoisyOr { .. } => NodeParams::Shared,
        })
    }

    /// The conditional a node has with no parents (the reference law `Q₀`).
    pub fn root_conditional(&self, node: usize) -> Result<Conditional> {
        let params = self.node_params(node, 0, 1)?;
        Ok(conditional(&self.family, &params, self.gaussian_shared(), &[]))
    }

    /// Applies the map to `g`.
    pub fn materialize(&self, g: &Dag) -> Result<BayesNet> {
        self.validate()?;
        let pos = g.topological_positions();
        let nodes = (0..g.m())
            .map(|i| self.node_params(i, g.parent_mask(i), pos[i] + 1))
            .collect::<Result<Vec<_>>>()?;
        Ok(BayesNet::from_parts(g.clone(), self.family.clone(), nodes, self.gaussian_shared()))
    }

    fn cpt_row(&self, r: &mut Rng, v: usize, theta_min: f64) -> Vec<f64> {
        let free = 1.0 - v as f64 * theta_min;
        match self.policy {
            ParamPolicy::Random => dirichlet(r, v, self.dirichlet_alpha)
                .into_iter()
                .map(|x| theta_min + free * x)
                .collect(),
            ParamPolicy::Extreme => {
                let top = r.random_range(0..v);
                (0..v).map(|j| if j == top { theta_min + free } else { theta_min }).collect()
            }
        }
    }

    fn l2_weights(&self, r: &mut Rng, k: usize, radius: f64) -> Vec<f64> {
        let dir: Vec<f64> = loop {
            let z: Vec<f64> = (0..k).map(|_| StandardNormal.sample(r)).collect();
            let norm = z.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                break z.into_iter().map(|x| x / norm).collect();
            }
        };
        let len = match self.policy {
            ParamPolicy::Random => radius * r.random::<f64>(),
            ParamPolicy::Extreme => radius,
        };
        // Rounding can push the norm a hair past the radius; shrink by one ulp-scale factor.
        dir.into_iter().map(|x| x * len * (1.0 - 1e-15)).collect()
    }

    fn l1_weights(&self, r: &mut Rng, k: usize, radius: f64) -> Vec<f64> {
        if k == 0 {
            return Vec::new();
        }
        // Spacings of k+1 exponentials are uniform on the simplex; dropping
        // the slack coordinate gives the uniform law on the ℓ₁ ball.
        let slack = usize::from(self.policy == ParamPolicy::Random);
        let e: Vec<f64> = (0..k + slack).map(|_| Exp1.sample(r)).collect();
        let total: f64 = e.iter().sum();
        e[..k]
            .iter()
            .map(|x| {
                let sign = if r.random_bool(0.5) { 1.0 } else { -1.0 };
                sign * radius * (x / total) * (1.0 - 1e-15)
            })
            .collect()
    }
}

fn uniform(r: &mut Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        r.random_range(lo..=hi)
    } else {
        lo
    }
}

fn checked_rows(v: usize, k: usize) -> Result<usize> {
    (v as u128)
        .checked_pow(k as u32)
        .filter(|&n| n <= MAX_TABLE_ROWS as u128)
        .map(|n| n as usize)
        .ok_or_else(|| {
            Error::Capability(format!(
                "a {v}-state table with {k} parents exceeds {MAX_TABLE_ROWS} rows"
            ))
        })
}

/// Row index of a parent configuration (first parent most significant).
pub(crate) fn row_index(v: usize, parent_values: &[f64]) -> usize {
    parent_values.iter().fold(0, |acc, &x| acc * v + x as usize)
}

/// The node's conditional law for the given parent values (ascending parent order).
pub(crate) fn conditional(
    family: &FamilyModel,
    params: &NodeParams,
    shared: Option<(f64, f64)>,
    parent_values: &[f64],
) -> Conditional {
    match (family, params) {
        (FamilyModel::Cpt { v, .. }, NodeParams::Table { rows }) => Conditional::Categorical {
            probs: rows[row_index(*v, parent_values)].clone(),
        },
        (FamilyModel::Gaussian { .. }, NodeParams::Weights { weights }) => {
            let (mu, sigma) = shared.expect("gaussian nets carry shared parameters");
            let mean = if weights.is_empty() {
                mu
            } else {
                weights.iter().zip(parent_values).map(|(w, x)| w * x).sum()
            };
            Conditional::Gaussian {
                mean,
                variance: sigma * sigma / 2.0,
            }
        }
        (FamilyModel::Logistic { .. }, NodeParams::Weights { weights }) => {
            let z: f64 = weights.iter().zip(parent_values).map(|(w, x)| w * x).sum();
            Conditional::Bernoulli { p1: sigmoid(z) }
        }
        (FamilyModel::NoisyOr { theta }, NodeParams::Shared) => {
            if parent_values.is_empty() {
                Conditional::Bernoulli { p1: *theta }
            } else {
                // Failure probability θ·θ^{mean of parent values}.
                let mean = parent_values.iter().sum::<f64>() / parent_values.len() as f64;
                Conditional::Bernoulli {
                    p1: 1.0 - theta * theta.powf(mean),
                }
            }
        }
        _ => unreachable!("node parameters always match their family"),
    }
}

/// Parameters were materialised for this graph; used by `BayesNet` invariants.
pub(crate) fn params_match(family: &FamilyModel, g: &Dag, nodes: &[NodeParams]) -> bool {
    nodes.len() == g.m()
        && nodes.iter().enumerate().all(|(i, p)| {
            let k = g.in_degree(i);
            match (family, p) {
                (FamilyModel::Cpt { v, .. }, NodeParams::Table { rows }) => {
                    rows.len() == v.pow(k as u32) && rows.iter().all(|r| r.len() == *v)
                }
                (FamilyModel::Gaussian { .. } | FamilyModel::Logistic { .. }, NodeParams::Weights { weights }) => {
                    weights.len() == k
                }
                (FamilyModel::NoisyOr { .. }, NodeParams::Shared) => true,
                _ => false,
            }
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cpt_cells_respect_floor() {
        let pm = ParamMap::new(FamilyModel::cpt(2, 0.3).unwrap(), 5).unwrap();
        let g = Dag::from_edges(3, &[(0, 2), (1, 2)]).unwrap();
        let bn = pm.materialize(&g).unwrap();
        for p in bn.nodes() {
            let NodeParams::Table { rows } = p else { panic!() };
            for row in rows {
                assert!(row.iter().all(|&c| (0.3..=0.7).contains(&c)));
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gaussian_weights_in_ball_and_root_law() {
        let fam = FamilyModel::gaussian(-1.0, 2.0, 0.5, 1.5).unwrap();
        for policy in [ParamPolicy::Random, ParamPolicy::Extreme] {
            let pm = ParamMap::new(fam.clone(), 11).unwrap().with_policy(policy);
            let g = Dag::from_edges(4, &[(0, 1), (0, 2), (1, 2), (2, 3), (1, 3)]).unwrap();
            let bn = pm.materialize(&g).unwrap();
            let (mu, sigma) = bn.gaussian_shared().unwrap();
            assert!((-1.0..=2.0).contains(&mu) && (0.5..=1.5).contains(&sigma));
            let pos = g.topological_positions();
            for (i, p) in bn.nodes().iter().enumerate() {
                let NodeParams::Weights { weights } = p else { panic!() };
                if !weights.is_empty() {
                    let norm: f64 = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
                    assert!(norm <= 1.0 / (2.0 * pos[i] as f64).sqrt());
                }
            }
            assert_eq!(
                pm.root_conditional(0).unwrap(),
                Conditional::Gaussian {
                    mean: mu,
                    variance: sigma * sigma / 2.0
                }
            );
        }
    }

    #[test]
    fn logistic_weights_in_l1_ball() {
        for policy in [ParamPolicy::Random, ParamPolicy::Extreme] {
            let pm = ParamMap::new(FamilyModel::logistic(0.7).unwrap(), 3)
                .unwrap()
                .with_policy(policy);
            for mask in 1u64..32 {
                let NodeParams::Weights { weights } = pm.node_params(5, mask, 6).unwrap() else {
                    panic!()
                };
                assert_eq!(weights.len(), mask.count_ones() as usize);
                assert!(weights.iter().map(|w| w.abs()).sum::<f64>() <= 0.7);
            }
        }
    }

    #[test]
    fn noisy_or_shares_theta() {
        let fam = FamilyModel::noisy_or(0.5).unwrap();
        let pm = ParamMap::new(fam.clone(), 0).unwrap();
        assert_eq!(pm.root_conditional(3).unwrap(), Conditional::Bernoulli { p1: 0.5 });
        let c = conditional(&fam, &NodeParams::Shared, None, &[1.0]);
        assert_eq!(c, Conditional::Bernoulli { p1: 0.75 });
    }

    #[test]
    fn same_parent_set_same_parameters() {
        let pm = ParamMap::new(FamilyModel::cpt(3, 0.1).unwrap(), 9).unwrap();
        let a = pm.materialize(&Dag::from_edges(3, &[(0, 2)]).unwrap()).unwrap();
        let b = pm.materialize(&Dag::from_edges(3, &[(0, 2), (0, 1)]).unwrap()).unwrap();
        assert_eq!(a.nodes()[2], b.nodes()[2]);
        assert_eq!(a.nodes()[0], b.nodes()[0]);
        assert_ne!(a.nodes()[1], b.nodes()[1]);
    }

    #[test]
    fn infeasible_hyperparameters_rejected() {
        assert!(FamilyModel::cpt(3, 0.5).is_err());
        assert!(matches!(checked_rows(2, 21), Err(Error::Capability(_))));
    }
}
