use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::family::{Conditional, FamilyModel};
use super::params::{conditional, params_match, NodeParams};
use super::{natural_param, NaturalParam};
use crate::dag::Dag;
use crate::rng;
use crate::{Error, Result};

/// Largest state space `joint_distribution` will tabulate.
pub const MAX_JOINT_STATES: usize = 1_000_000;

/// A DAG together with materialised conditionals.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BayesNet {
    g: Dag,
    family: FamilyModel,
    nodes: Vec<NodeParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    shared: Option<(f64, f64)>,
}

/// `n` observations of `m` variables, row-major. Discrete values are stored
/// as small non-negative integers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    n: usize,
    m: usize,
    values: Vec<f64>,
}

impl Dataset {
    pub fn new(m: usize, values: Vec<f64>) -> Result<Self> {
        if m == 0 || !values.len().is_multiple_of(m) {
            return Err(Error::Dimension {
                expected: m.max(1) * (values.len() / m.max(1)),
                got: values.len(),
            });
        }
        Ok(Dataset {
            n: values.len() / m,
            m,
            values,
        })
    }

    pub fn empty(m: usize) -> Self {
        Dataset {
            n: 0,
            m,
            values: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.m..(i + 1) * self.m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.m.max(1))
    }

    /// Keeps the first `n` rows.
    pub fn truncated(&self, n: usize) -> Dataset {
        let n = n.min(self.n);
        Dataset {
            n,
            m: self.m,
            values: self.values[..n * self.m].to_vec(),
        }
    }
}

impl BayesNet {
    pub(crate) fn from_parts(g: Dag, family: FamilyModel, nodes: Vec<NodeParams>, shared: Option<(f64, f64)>) -> Self {
        debug_assert!(params_match(&family, &g, &nodes));
        BayesNet {
            g,
            family,
            nodes,
            shared,
        }
    }

    /// Assembles a network from explicit parameters, checking their shapes.
    pub fn new(g: Dag, family: FamilyModel, nodes: Vec<NodeParams>, shared: Option<(f64, f64)>) -> Result<Self> {
        family.validate()?;
        if !params_match(&family, &g, &nodes) {
            return Err(Error::Usage("node parameters do not match the graph's parent sets".into()));
        }
        if matches!(family, FamilyModel::Gaussian { .. }) && shared.is_none() {
            return Err(Error::Usage("a Gaussian network needs a shared (mu, sigma)".into()));
        }
        Ok(BayesNet::from_parts(g, family, nodes, shared))
    }

    pub fn dag(&self) -> &Dag {
        &self.g
    }

    pub fn family(&self) -> &FamilyModel {
        &self.family
    }

    pub fn nodes(&self) -> &[NodeParams] {
        &self.nodes
    }

    pub fn gaussian_shared(&self) -> Option<(f64, f64)> {
        self.shared
    }

    /// Conditional of node `i` given values of its parents (ascending order).
    pub fn conditional_given(&self, i: usize, parent_values: &[f64]) -> Result<Conditional> {
        let k = self.g.in_degree(i);
        if parent_values.len() != k {
            return Err(Error::Dimension {
                expected: k,
                got: parent_values.len(),
            });
        }
        Ok(conditional(&self.family, &self.nodes[i], self.shared, parent_values))
    }

    /// Conditional of node `i` read off a full assignment.
    pub fn conditional_in(&self, i: usize, assignment: &[f64]) -> Conditional {
        let pv: Vec<f64> = self.g.parents(i).map(|p| assignment[p]).collect();
        conditional(&self.family, &self.nodes[i], self.shared, &pv)
    }

    pub fn natural_param(&self, i: usize, parent_values: &[f64]) -> Result<NaturalParam> {
        natural_param(&self.family, &self.conditional_given(i, parent_values)?)
    }

    /// `n` i.i.d. rows by ancestral sampling; deterministic in `seed`.
    pub fn forward_sample(&self, n: usize, seed: u64) -> Dataset {
        let m = self.g.m();
        let order = self.g.topological_order().expect("a BayesNet holds a valid DAG");
        let mut r = rng::rng_from(seed);
        let mut values = vec![0.0; n * m];
        for row in values.chunks_exact_mut(m) {
            for &i in &order {
                row[i] = self.conditional_in(i, row).sample(&mut r);
            }
        }
        Dataset { n, m, values }
    }

    /// Exact joint table, row-major with node 0 the most significant digit.
    pub fn joint_distribution(&self) -> Result<Vec<f64>> {
        let v = self.family.support().ok_or_else(|| {
            Error::Capability("joint tables exist only for discrete families".into())
        })?;
        let m = self.g.m();
        let states = (v as u128)
            .checked_pow(m as u32)
            .filter(|&s| s <= MAX_JOINT_STATES as u128)
            .ok_or_else(|| {
                Error::Capability(format!("{v}^{m} states exceed the {MAX_JOINT_STATES}-state limit"))
            })? as usize;
        let mut x = vec![0.0; m];
        Ok((0..states)
            .map(|s| {
                let mut rest = s;
                for j in (0..m).rev() {
                    x[j] = (rest % v) as f64;
                    rest /= v;
                }
                (0..m).map(|i| self.conditional_in(i, &x).prob(x[i] as usize)).product()
            })
            .collect())
    }

    /// Log-likelihood of one row.
    pub fn log_prob_row(&self, row: &[f64]) -> f64 {
        (0..self.g.m()).map(|i| self.conditional_in(i, row).log_prob(row[i])).sum()
    }

    /// `Σ_rows Σ_nodes ln p(x_i | x_π)`; `-∞` flags an observation of zero mass.
    pub fn log_likelihood(&self, data: &Dataset) -> Result<f64> {
        if data.m() != self.g.m() {
            return Err(Error::Dimension {
                expected: self.g.m(),
                got: data.m(),
            });
        }
        Ok(data.rows().map(|r| self.log_prob_row(r)).sum())
    }
}

/// Exact mean vector and covariance matrix of a Gaussian network, in node
/// index order, built by the linear recursion along a topological order.
pub fn gaussian_moments(bn: &BayesNet) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let (mu, sigma) = bn
        .gaussian_shared()
        .ok_or_else(|| Error::Usage("moments are only defined for Gaussian networks".into()))?;
    let m = bn.dag().m();
    let noise = sigma * sigma / 2.0;
    let mut mean = DVector::zeros(m);
    let mut cov = DMatrix::zeros(m, m);
    let order = bn.dag().topological_order()?;
    for (t, &i) in order.iter().enumerate() {
        let NodeParams::Weights { weights } = &bn.nodes()[i] else {
            unreachable!("gaussian nodes carry weights")
        };
        let parents = bn.dag().parent_list(i);
        if parents.is_empty() {
            mean[i] = mu;
        } else {
            mean[i] = parents.iter().zip(weights).map(|(&p, w)| w * mean[p]).sum();
        }
        for &j in &order[..t] {
            let c: f64 = parents.iter().zip(weights).map(|(&p, w)| w * cov[(p, j)]).sum();
            cov[(i, j)] = c;
            cov[(j, i)] = c;
        }
        cov[(i, i)] = quad_form(&cov, &parents, weights) + noise;
    }
    Ok((mean, cov))
}

fn quad_form(cov: &DMatrix<f64>, idx: &[usize], w: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (a, &p) in idx.iter().enumerate() {
        for (b, &q) in idx.iter().enumerate() {
            acc += w[a] * w[b] * cov[(p, q)];
        }
    }
    acc
}

/// Spectral data of the covariance restricted to a topological prefix.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PrefixSpectrum {
    /// 1-based prefix length.
    pub position: usize,
    pub node: usize,
    /// Largest eigenvalue of the prefix covariance.
    pub lambda_max: f64,
    /// Variance of the node's conditional mean (0 for roots).
    pub mean_variance: f64,
    /// `σ²` (the conditional variance is half of it).
    pub sigma2: f64,
}

/// For each prefix of the topological order, `λ_max` of its covariance and
/// the variance of the newest node's conditional mean.
pub fn prefix_spectrum(bn: &BayesNet) -> Result<Vec<PrefixSpectrum>> {
    let (_, cov) = gaussian_moments(bn)?;
    let sigma = bn.gaussian_shared().expect("checked by gaussian_moments").1;
    let order = bn.dag().topological_order()?;
    Ok(order
        .iter()
        .enumerate()
        .map(|(t, &i)| {
            let idx = &order[..=t];
            let sub = DMatrix::from_fn(t + 1, t + 1, |a, b| cov[(idx[a], idx[b])]);
            let lambda_max = SymmetricEigen::new(sub).eigenvalues.max();
            let NodeParams::Weights { weights } = &bn.nodes()[i] else {
                unreachable!("gaussian nodes carry weights")
            };
            PrefixSpectrum {
                position: t + 1,
                node: i,
                lambda_max,
                mean_variance: quad_form(&cov, &bn.dag().parent_list(i), weights),
                sigma2: sigma * sigma,
            }
        })
        .collect())
}
