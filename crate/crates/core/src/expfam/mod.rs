//! Exponential-family view of the per-node conditionals.
//!
//! Conventions (all in nats):
//!
//! * CPT — statistic `(1[x = j])_j`, `η = ln p`, `ψ(η) = logsumexp η`, `μ(η) = softmax η`.
//! * Logistic — statistic `x`, `η = logit P(X = 1)`, `ψ(η) = ln(1 + e^η)`.
//! * Noisy-OR — statistic `1[x = 0]`, so `η = logit P(X = 0)`; a child's failure
//!   probability `θ_i` is exactly `P(X_i = 0)`.
//! * Gaussian — statistic `x / s` with `s = σ/√2`, `η = mean / s`, `ψ(η) = η²/2`,
//!   `μ(η) = η`.

mod family;
mod network;
mod params;

pub use family::{Conditional, FamilyModel};
pub use network::{gaussian_moments, prefix_spectrum, BayesNet, Dataset, PrefixSpectrum, MAX_JOINT_STATES};
pub use params::{NodeParams, ParamMap, ParamPolicy, MAX_TABLE_ROWS};

use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::{rng, Error, Result};

/// Canonical coordinates of one conditional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NaturalParam {
    pub coords: Vec<f64>,
}

impl NaturalParam {
    pub fn new(coords: Vec<f64>) -> Self {
        NaturalParam { coords }
    }

    pub fn scalar(eta: f64) -> Self {
        NaturalParam { coords: vec![eta] }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn logsumexp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn check_dim(model: &FamilyModel, eta: &NaturalParam) -> Result<()> {
    if eta.dim() != model.dim() {
        return Err(Error::Dimension {
            expected: model.dim(),
            got: eta.dim(),
        });
    }
    Ok(())
}

fn mismatch(model: &FamilyModel, c: &Conditional) -> Error {
    Error::Usage(format!("a {c:?} conditional does not belong to the {} family", model.name()))
}

/// Natural parameter of a conditional law.
pub fn natural_param(model: &FamilyModel, c: &Conditional) -> Result<NaturalParam> {
    let open_unit = |p: f64| {
        if p > 0.0 && p < 1.0 {
            Ok(p)
        } else {
            Err(Error::Domain(format!("probability {p} has no finite log-odds")))
        }
    };
    match (model, c) {
        (FamilyModel::Cpt { v, .. }, Conditional::Categorical { probs }) => {
            if probs.len() != *v {
                return Err(Error::Dimension {
                    expected: *v,
                    got: probs.len(),
                });
            }
            if let Some(p) = probs.iter().find(|&&p| p <= 0.0) {
                return Err(Error::Domain(format!("table cell {p} has no finite logarithm")));
            }
            Ok(NaturalParam::new(probs.iter().map(|p| p.ln()).collect()))
        }
        (FamilyModel::Logistic { .. }, Conditional::Bernoulli { p1 }) => {
            Ok(NaturalParam::scalar(logit(open_unit(*p1)?)))
        }
        (FamilyModel::NoisyOr { .. }, Conditional::Bernoulli { p1 }) => {
            Ok(NaturalParam::scalar(logit(open_unit(1.0 - p1)?)))
        }
        (FamilyModel::Gaussian { .. }, Conditional::Gaussian { mean, variance }) => {
            Ok(NaturalParam::scalar(mean / variance.sqrt()))
        }
        _ => Err(mismatch(model, c)),
    }
}

/// `μ(η) = ∇ψ(η)`.
pub fn expected_suff_stat(model: &FamilyModel, eta: &NaturalParam) -> Result<Vec<f64>> {
    check_dim(model, eta)?;
    Ok(match model {
        FamilyModel::Cpt { .. } => {
            let z = logsumexp(&eta.coords);
            eta.coords.iter().map(|e| (e - z).exp()).collect()
        }
        FamilyModel::Logistic { .. } | FamilyModel::NoisyOr { .. } => vec![sigmoid(eta.coords[0])],
        FamilyModel::Gaussian { .. } => vec![eta.coords[0]],
    })
}

/// `ψ(η)`.
pub fn log_partition(model: &FamilyModel, eta: &NaturalParam) -> Result<f64> {
    check_dim(model, eta)?;
    Ok(match model {
        FamilyModel::Cpt { .. } => logsumexp(&eta.coords),
        FamilyModel::Logistic { .. } | FamilyModel::NoisyOr { .. } => softplus(eta.coords[0]),
        FamilyModel::Gaussian { .. } => 0.5 * eta.coords[0] * eta.coords[0],
    })
}

/// `Δ(η₁, η₂) = (η₁ − η₂)ᵀ(μ(η₁) − μ(η₂))`, an upper bound on `KL(P_{η₁} ‖ P_{η₂})`.
pub fn delta_bound(model: &FamilyModel, eta1: &NaturalParam, eta2: &NaturalParam) -> Result<f64> {
    check_dim(model, eta1)?;
    check_dim(model, eta2)?;
    let mu1 = expected_suff_stat(model, eta1)?;
    let mu2 = expected_suff_stat(model, eta2)?;
    Ok(eta1
        .coords
        .iter()
        .zip(&eta2.coords)
        .zip(mu1.iter().zip(&mu2))
        .map(|((a, b), (c, d))| (a - b) * (c - d))
        .sum())
}

/// Exact `KL(c1 ‖ c2)`.
pub fn kl_exact(c1: &Conditional, c2: &Conditional) -> Result<f64> {
    fn term(p: f64, q: f64) -> f64 {
        if p <= 0.0 {
            0.0
        } else if q <= 0.0 {
            f64::INFINITY
        } else {
            p * (p / q).ln()
        }
    }
    match (c1, c2) {
        (Conditional::Categorical { probs: p }, Conditional::Categorical { probs: q }) => {
            if p.len() != q.len() {
                return Err(Error::Dimension {
                    expected: p.len(),
                    got: q.len(),
                });
            }
            Ok(p.iter().zip(q).map(|(&a, &b)| term(a, b)).sum())
        }
        (Conditional::Bernoulli { p1: p }, Conditional::Bernoulli { p1: q }) => {
            Ok(term(*p, *q) + term(1.0 - p, 1.0 - q))
        }
        (
            Conditional::Gaussian {
                mean: m1,
                variance: v1,
            },
            Conditional::Gaussian {
                mean: m2,
                variance: v2,
            },
        ) => Ok(0.5 * ((v2 / v1).ln() + (v1 + (m1 - m2).powi(2)) / v2 - 1.0)),
        _ => Err(Error::Usage(format!("no KL between {c1:?} and {c2:?}"))),
    }
}

/// Normalised Gamma draws: a symmetric Dirichlet sample of length `v`.
pub(crate) fn dirichlet<R: rand::Rng + ?Sized>(rng: &mut R, v: usize, alpha: f64) -> Vec<f64> {
    let gamma = Gamma::new(alpha, 1.0).expect("alpha validated positive");
    loop {
        let draws: Vec<f64> = (0..v).map(|_| gamma.sample(rng)).collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 {
            return draws.into_iter().map(|x| x / total).collect();
        }
    }
}

/// A random pair of conditionals from `model`, as used by the domination check.
/// Gaussian pairs share their variance (the family's statistic fixes it).
pub fn random_pair<R: rand::Rng + ?Sized>(model: &FamilyModel, rng: &mut R) -> (Conditional, Conditional) {
    let one = |rng: &mut R| -> Conditional {
        match *model {
            FamilyModel::Cpt { v, theta_min } => Conditional::Categorical {
                probs: dirichlet(rng, v, 1.0)
                    .into_iter()
                    .map(|x| theta_min + (1.0 - v as f64 * theta_min) * x)
                    .collect(),
            },
            FamilyModel::Logistic { .. } | FamilyModel::NoisyOr { .. } => Conditional::Bernoulli {
                p1: rng.random_range(1e-3..1.0 - 1e-3),
            },
            FamilyModel::Gaussian { .. } => unreachable!("gaussian pairs are drawn jointly"),
        }
    };
    if let FamilyModel::Gaussian {
        mu_a,
        mu_b,
        sigma_min,
        sigma_max,
        ..
    } = *model
    {
        let sigma = if sigma_max > sigma_min {
            rng.random_range(sigma_min..=sigma_max)
        } else {
            sigma_min
        };
        let spread = 3.0 * sigma;
        let variance = sigma * sigma / 2.0;
        let mut mean = || rng.random_range(mu_a - spread..=mu_b + spread);
        let (m1, m2) = (mean(), mean());
        return (
            Conditional::Gaussian { mean: m1, variance },
            Conditional::Gaussian { mean: m2, variance },
        );
    }
    (one(rng), one(rng))
}

/// Outcome of a randomized `0 ≤ KL ≤ Δ` sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KlCheck {
    pub family: FamilyModel,
    pub trials: usize,
    pub violations: usize,
    pub max_kl: f64,
    pub max_delta: f64,
    /// Largest `KL / Δ` seen over pairs with `Δ > 0`.
    pub max_ratio: f64,
    pub tolerance: f64,
}

impl KlCheck {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Checks `0 ≤ KL(P₁‖P₂) ≤ Δ(η₁, η₂)` on `trials` random pairs.
pub fn verify_kl(model: &FamilyModel, trials: usize, seed: u64, tolerance: f64) -> Result<KlCheck> {
    model.validate()?;
    let mut rng = rng::derived_rng(seed, &[0x4b4c]);
    let mut out = KlCheck {
        family: model.clone(),
        trials,
        violations: 0,
        max_kl: 0.0,
        max_delta: 0.0,
        max_ratio: 0.0,
        tolerance,
    };
    for _ in 0..trials {
        let (c1, c2) = random_pair(model, &mut rng);
        let kl = kl_exact(&c1, &c2)?;
        let delta = delta_bound(model, &natural_param(model, &c1)?, &natural_param(model, &c2)?)?;
        if kl < -tolerance || kl > delta + tolerance {
            out.violations += 1;
        }
        out.max_kl = out.max_kl.max(kl);
        out.max_delta = out.max_delta.max(delta);
        if delta > 0.0 {
            out.max_ratio = out.max_ratio.max(kl / delta);
        }
    }
    Ok(out)
}
