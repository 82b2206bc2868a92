use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{self, DeltaRule};
use crate::ensembles::{Ensemble, EnsembleSpec};
use crate::expfam::{
    delta_bound, gaussian_moments, kl_exact, natural_param, BayesNet, Conditional, FamilyModel, ParamMap,
};
use crate::rng;
use crate::{Error, Result};

/// `|ensemble| · (states)^n` above which exact MI is refused.
pub const MAX_EXACT_WORK: u128 = 10_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MiReport {
    pub ensemble: EnsembleSpec,
    pub n: usize,
    pub ensemble_size: usize,
    /// `I(S; G | Θ)` in nats, exact or estimated.
    pub estimate: f64,
    /// Zero for exact values; `None` when fewer than two trials were run.
    pub std_error: Option<f64>,
    pub exact: bool,
    pub trials: usize,
    /// Average-divergence bound with the empty-parent reference laws.
    pub upper_bound_kl: f64,
    /// `n · m · Δ_max`.
    pub upper_bound_assumption: f64,
    pub delta_max: f64,
}

fn members(spec: &EnsembleSpec, pm: &ParamMap) -> Result<Vec<BayesNet>> {
    let ens = Ensemble::cached(spec)?;
    ens.members().iter().map(|g| pm.materialize(g)).collect()
}

/// Exact `I(S; G | Θ)` for `G` uniform on the ensemble and `S` of `n` i.i.d.
/// rows, as the average divergence of each member's data law from the mixture.
pub fn mi_exact(spec: &EnsembleSpec, pm: &ParamMap, n: usize) -> Result<f64> {
    if !pm.family.is_discrete() {
        return Err(Error::Capability("exact MI needs a discrete family".into()));
    }
    let nets = members(spec, pm)?;
    let tables = nets
        .iter()
        .map(|bn| bn.joint_distribution())
        .collect::<Result<Vec<_>>>()?;
    let states = tables[0].len();
    let work = (states as u128)
        .checked_pow(n as u32)
        .and_then(|d| d.checked_mul(nets.len() as u128))
        .filter(|&w| w <= MAX_EXACT_WORK)
        .ok_or_else(|| {
            Error::Capability(format!(
                "{} members × {states}^{n} datasets exceeds the exact-MI budget of {MAX_EXACT_WORK}",
                nets.len()
            ))
        })?;
    let datasets = (work / nets.len() as u128) as usize;
    let g = nets.len() as f64;
    let total: f64 = (0..datasets)
        .into_par_iter()
        .map(|d| {
            let probs: Vec<f64> = tables
                .iter()
                .map(|t| {
                    let mut rest = d;
                    let mut p = 1.0;
                    for _ in 0..n {
                        p *= t[rest % states];
                        rest /= states;
                    }
                    p
                })
                .collect();
            let mix = probs.iter().sum::<f64>() / g;
            probs
                .iter()
                .filter(|&&p| p > 0.0)
                .map(|&p| p * (p / mix).ln())
                .sum::<f64>()
                / g
        })
        .sum();
    Ok(total.max(0.0))
}

/// Per-node `E_{X_π}[f(P_i(X_π), Q₀_i)]` under the network's own joint law.
fn expected_per_node<F>(bn: &BayesNet, pm: &ParamMap, f: F) -> Result<Vec<f64>>
where
    F: Fn(&Conditional, &Conditional) -> Result<f64>,
{
    let m = bn.dag().m();
    let roots = (0..m).map(|i| pm.root_conditional(i)).collect::<Result<Vec<_>>>()?;
    let v = bn.family().support().expect("discrete family");
    let joint = bn.joint_distribution()?;
    let mut out = vec![0.0; m];
    let mut x = vec![0.0; m];
    for (s, &p) in joint.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let mut rest = s;
        for j in (0..m).rev() {
            x[j] = (rest % v) as f64;
            rest /= v;
        }
        for i in 0..m {
            if bn.dag().in_degree(i) > 0 {
                out[i] += p * f(&bn.conditional_in(i, &x), &roots[i])?;
            }
        }
    }
    Ok(out)
}

/// `E[Δ(η_i, η_0)]` for each node, with `η_0` the node's empty-parent law.
/// Gaussian networks use the closed form `2((E μ_i − μ)² + Var μ_i)/σ²`.
pub fn expected_delta(bn: &BayesNet, pm: &ParamMap) -> Result<Vec<f64>> {
    if let FamilyModel::Gaussian { .. } = bn.family() {
        let (mu, sigma) = bn.gaussian_shared().expect("gaussian net");
        let (mean, cov) = gaussian_moments(bn)?;
        return Ok((0..bn.dag().m())
            .map(|i| {
                let parents = bn.dag().parent_list(i);
                if parents.is_empty() {
                    return 0.0;
                }
                let crate::expfam::NodeParams::Weights { weights } = &bn.nodes()[i] else {
                    unreachable!("gaussian nodes carry weights")
                };
                let e: f64 = parents.iter().zip(weights).map(|(&p, w)| w * mean[p]).sum();
                let mut var = 0.0;
                for (&p, wp) in parents.iter().zip(weights) {
                    for (&q, wq) in parents.iter().zip(weights) {
                        var += wp * wq * cov[(p, q)];
                    }
                }
                2.0 * ((e - mu).powi(2) + var) / (sigma * sigma)
            })
            .collect());
    }
    let fam = bn.family().clone();
    expected_per_node(bn, pm, |c, q| {
        delta_bound(&fam, &natural_param(&fam, c)?, &natural_param(&fam, q)?)
    })
}

/// `E[KL(P_i(X_π) ‖ Q₀_i)]` for each node (discrete families).
pub fn expected_kl(bn: &BayesNet, pm: &ParamMap) -> Result<Vec<f64>> {
    if !bn.family().is_discrete() {
        return Err(Error::Capability("expected KL is tabulated for discrete families only".into()));
    }
    expected_per_node(bn, pm, kl_exact)
}

/// Upper bound on `I(S; G | Θ)` from the per-node divergences to the
/// empty-parent laws: `(n/|G|) Σ_G Σ_i E[KL]` for restricted ensembles and
/// `((m − m_l) n/|G|) Σ_G max_i E[KL]` for layered ones. Gaussian networks
/// use `E[Δ]` in place of `E[KL]`.
pub fn mi_upper_bound(spec: &EnsembleSpec, pm: &ParamMap, n: usize) -> Result<f64> {
    let nets = members(spec, pm)?;
    let per_graph = nets
        .par_iter()
        .map(|bn| {
            let terms = if pm.family.is_discrete() {
                expected_kl(bn, pm)?
            } else {
                expected_delta(bn, pm)?
            };
            Ok(if spec.kind().is_layered() {
                let m_eff = spec.m() - spec.top_layer_size();
                m_eff as f64 * terms.iter().copied().fold(0.0, f64::max)
            } else {
                terms.iter().sum()
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(n as f64 * per_graph.iter().sum::<f64>() / nets.len() as f64)
}

/// Plug-in estimate of `I(S; G | Θ)`: the mean over sampled `(G, S)` of
/// `ln P(S|G) − ln((1/|G|) Σ_{G'} P(S|G'))`, with exact inner likelihoods.
pub fn mi_monte_carlo(spec: &EnsembleSpec, pm: &ParamMap, n: usize, trials: usize, seed: u64) -> Result<(f64, Option<f64>)> {
    if trials == 0 {
        return Err(Error::Usage("at least one trial is needed".into()));
    }
    let nets = members(spec, pm)?;
    let ln_g = (nets.len() as f64).ln();
    let samples: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut r = rng::derived_rng(seed, &[0x4d49, t as u64]);
            let pick = rand::Rng::random_range(&mut r, 0..nets.len());
            let data = nets[pick].forward_sample(n, rand::Rng::random(&mut r));
            let lls: Vec<f64> = nets
                .iter()
                .map(|bn| bn.log_likelihood(&data).expect("shapes match"))
                .collect();
            let max = lls.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lme = max + lls.iter().map(|l| (l - max).exp()).sum::<f64>().ln() - ln_g;
            lls[pick] - lme
        })
        .collect();
    let mean = samples.iter().sum::<f64>() / trials as f64;
    let se = (trials > 1).then(|| {
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
        (var / trials as f64).sqrt()
    });
    Ok((mean, se))
}

/// How to obtain the MI value in an `MiReport`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MiMethod {
    Exact,
    MonteCarlo { trials: usize, seed: u64 },
}

pub fn mi_report(spec: &EnsembleSpec, pm: &ParamMap, n: usize, method: MiMethod, rule: DeltaRule) -> Result<MiReport> {
    let size = Ensemble::cached(spec)?.len();
    let (estimate, std_error, exact, trials) = match method {
        MiMethod::Exact => (mi_exact(spec, pm, n)?, Some(0.0), true, 0),
        MiMethod::MonteCarlo { trials, seed } => {
            let (e, se) = mi_monte_carlo(spec, pm, n, trials, seed)?;
            (e, se, false, trials)
        }
    };
    let delta = bounds::delta_for(&pm.family, rule)?;
    Ok(MiReport {
        ensemble: spec.clone(),
        n,
        ensemble_size: size,
        estimate,
        std_error,
        exact,
        trials,
        upper_bound_kl: mi_upper_bound(spec, pm, n)?,
        upper_bound_assumption: n as f64 * spec.m() as f64 * delta,
        delta_max: delta,
    })
}
