use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dag::Dag;
use crate::ensembles::{Ensemble, EnsembleSpec};
use crate::expfam::{sigmoid, BayesNet, Dataset, FamilyModel, ParamMap};
use crate::{Error, Result};

/// Structure decoders. All of them maximise a score over the enumerated
/// ensemble and break ties towards the lowest member index.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decoder {
    /// Likelihood under the true parameter map.
    #[default]
    OracleBayes,
    /// Profile likelihood with plug-in maximum-likelihood parameters.
    MaxLikelihood,
    /// Profile likelihood minus `(ln n / 2)` per free parameter.
    Bic,
}

impl Decoder {
    pub fn name(self) -> &'static str {
        match self {
            Decoder::OracleBayes => "oracle_bayes",
            Decoder::MaxLikelihood => "max_likelihood",
            Decoder::Bic => "bic",
        }
    }
}

impl std::str::FromStr for Decoder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle_bayes" | "oracle" | "bayes" => Ok(Decoder::OracleBayes),
            "max_likelihood" | "ml" | "mle" => Ok(Decoder::MaxLikelihood),
            "bic" => Ok(Decoder::Bic),
            other => Err(Error::Usage(format!("unknown decoder '{other}'"))),
        }
    }
}

/// Ridge added to the logistic Newton steps so separable data stays finite.
const LOGISTIC_RIDGE: f64 = 1e-3;
const NOISY_OR_EPS: f64 = 1e-9;

/// Scores every member and returns the index of the best one.
///
/// `nets` must be the members materialised under `pm` when `d` is the
/// oracle; the other decoders ignore it.
pub(crate) fn decode_index(d: Decoder, data: &Dataset, members: &[Dag], nets: &[BayesNet], pm: &ParamMap) -> Result<usize> {
    if members.is_empty() {
        return Err(Error::Usage("cannot decode over an empty ensemble".into()));
    }
    if data.m() != members[0].m() {
        return Err(Error::Dimension {
            expected: members[0].m(),
            got: data.m(),
        });
    }
    let mut best = (0, f64::NEG_INFINITY);
    for (i, g) in members.iter().enumerate() {
        let s = match d {
            Decoder::OracleBayes => nets[i].log_likelihood(data)?,
            Decoder::MaxLikelihood => profile_log_likelihood(&pm.family, g, data)?,
            Decoder::Bic => {
                let penalty = (data.n().max(1) as f64).ln() / 2.0 * free_parameters(&pm.family, g) as f64;
                profile_log_likelihood(&pm.family, g, data)? - penalty
            }
        };
        // Strict comparison keeps the lowest index on ties; NaN never wins.
        if s > best.1 {
            best = (i, s);
        }
    }
    Ok(best.0)
}

/// Decodes `data` over the enumerated ensemble of `spec`.
pub fn decode(d: Decoder, data: &Dataset, spec: &EnsembleSpec, pm: &ParamMap) -> Result<Dag> {
    let ens = Ensemble::cached(spec)?;
    let nets = match d {
        Decoder::OracleBayes => ens.members().iter().map(|g| pm.materialize(g)).collect::<Result<Vec<_>>>()?,
        _ => Vec::new(),
    };
    let i = decode_index(d, data, ens.members(), &nets, pm)?;
    Ok(ens.members()[i].clone())
}

/// Free-parameter count used by the BIC penalty.
pub fn free_parameters(family: &FamilyModel, g: &Dag) -> usize {
    match family {
        FamilyModel::Cpt { v, .. } => (0..g.m()).map(|i| (v - 1) * v.pow(g.in_degree(i) as u32)).sum(),
        FamilyModel::Logistic { .. } => g.edge_count(),
        FamilyModel::Gaussian { .. } => g.edge_count() + 2,
        FamilyModel::NoisyOr { .. } => 0,
    }
}

/// Maximised log-likelihood of `data` under `g` with every free parameter
/// of the family set to its maximum-likelihood value.
pub fn profile_log_likelihood(family: &FamilyModel, g: &Dag, data: &Dataset) -> Result<f64> {
    if data.n() == 0 {
        return Ok(0.0);
    }
    Ok(match family {
        FamilyModel::Cpt { v, .. } => (0..g.m()).map(|i| cpt_node(*v, g, i, data)).sum(),
        FamilyModel::Gaussian { .. } => gaussian_profile(g, data),
        FamilyModel::Logistic { .. } => (0..g.m()).map(|i| logistic_node(g, i, data)).sum(),
        FamilyModel::NoisyOr { .. } => noisy_or_profile(g, data),
    })
}

fn cpt_node(v: usize, g: &Dag, i: usize, data: &Dataset) -> f64 {
    let parents = g.parent_list(i);
    let rows = v.pow(parents.len() as u32);
    let mut counts = vec![0usize; rows * v];
    for r in data.rows() {
        let idx = parents.iter().fold(0, |acc, &p| acc * v + r[p] as usize);
        counts[idx * v + r[i] as usize] += 1;
    }
    counts
        .chunks_exact(v)
        .map(|row| {
            let total: usize = row.iter().sum();
            row.iter()
                .filter(|&&c| c > 0)
                .map(|&c| c as f64 * (c as f64 / total as f64).ln())
                .sum::<f64>()
        })
        .sum()
}

/// Shared `μ` over the roots, per-node least-squares weights, and one pooled
/// variance for all nodes.
fn gaussian_profile(g: &Dag, data: &Dataset) -> f64 {
    let (n, m) = (data.n(), data.m());
    let roots: Vec<usize> = (0..m).filter(|&i| g.in_degree(i) == 0).collect();
    let root_mean = roots.iter().map(|&i| data.rows().map(|r| r[i]).sum::<f64>()).sum::<f64>()
        / (roots.len() * n) as f64;
    let mut rss = 0.0;
    for i in 0..m {
        let parents = g.parent_list(i);
        if parents.is_empty() {
            rss += data.rows().map(|r| (r[i] - root_mean).powi(2)).sum::<f64>();
            continue;
        }
        let x = DMatrix::from_fn(n, parents.len(), |r, c| data.row(r)[parents[c]]);
        let y = DVector::from_fn(n, |r, _| data.row(r)[i]);
        let w = x
            .clone()
            .svd(true, true)
            .solve(&y, 1e-12)
            .unwrap_or_else(|_| DVector::zeros(parents.len()));
        rss += (y - x * w).norm_squared();
    }
    let total = (n * m) as f64;
    let var = (rss / total).max(f64::MIN_POSITIVE);
    -0.5 * total * ((2.0 * std::f64::consts::PI * var).ln() + 1.0)
}

fn bernoulli_ll(y: f64, p1: f64) -> f64 {
    if y == 1.0 {
        p1.ln()
    } else {
        (1.0 - p1).ln()
    }
}

/// Logistic node without intercept: roots are fixed at `P(X=1) = 1/2`.
fn logistic_node(g: &Dag, i: usize, data: &Dataset) -> f64 {
    let parents = g.parent_list(i);
    if parents.is_empty() {
        return -(data.n() as f64) * std::f64::consts::LN_2;
    }
    let k = parents.len();
    let x = DMatrix::from_fn(data.n(), k, |r, c| data.row(r)[parents[c]]);
    let y = DVector::from_fn(data.n(), |r, _| data.row(r)[i]);
    let mut w = DVector::zeros(k);
    for _ in 0..100 {
        let z = &x * &w;
        let p = z.map(sigmoid);
        let grad = x.transpose() * (&y - &p) - &w * LOGISTIC_RIDGE;
        let s = p.map(|q| q * (1.0 - q));
        let mut h = x.transpose() * DMatrix::from_diagonal(&s) * &x;
        for d in 0..k {
            h[(d, d)] += LOGISTIC_RIDGE;
        }
        let Some(step) = h.cholesky().map(|c| c.solve(&grad)) else {
            break;
        };
        w += &step;
        if step.amax() < 1e-10 {
            break;
        }
    }
    let z = &x * &w;
    (0..data.n())
        .map(|r| {
            // Stable log-sigmoid.
            let t = if y[r] == 1.0 { z[r] } else { -z[r] };
            -(if t > 0.0 { (-t).exp().ln_1p() } else { -t + t.exp().ln_1p() })
        })
        .sum()
}

fn noisy_or_ll(g: &Dag, data: &Dataset, theta: f64) -> f64 {
    let mut ll = 0.0;
    for r in data.rows() {
        for i in 0..g.m() {
            let k = g.in_degree(i);
            let p1 = if k == 0 {
                theta
            } else {
                let mean = g.parents(i).map(|p| r[p]).sum::<f64>() / k as f64;
                1.0 - theta.powf(1.0 + mean)
            };
            ll += bernoulli_ll(r[i], p1);
        }
    }
    ll
}

/// Golden-section search over the shared `θ`; the log-likelihood is concave in it.
fn noisy_or_profile(g: &Dag, data: &Dataset) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (NOISY_OR_EPS, 1.0 - NOISY_OR_EPS);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (noisy_or_ll(g, data, c), noisy_or_ll(g, data, d));
    for _ in 0..80 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = noisy_or_ll(g, data, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = noisy_or_ll(g, data, d);
        }
    }
    [a, b, c, d]
        .into_iter()
        .map(|t| noisy_or_ll(g, data, t))
        .fold(f64::NEG_INFINITY, f64::max)
}
