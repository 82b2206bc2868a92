use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// The four conditional families and their hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilyModel {
    /// Categorical tables over `v` states with every cell at least `theta_min`.
    Cpt { v: usize, theta_min: f64 },
    /// Linear Gaussian with conditional variance `σ²/2`. `w_max` overrides the
    /// ℓ₂ weight bound used by `Δ_max` (default `1/√2`).
    Gaussian {
        mu_a: f64,
        mu_b: f64,
        sigma_min: f64,
        sigma_max: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        w_max: Option<f64>,
    },
    /// Binary, shared failure probability `theta`.
    NoisyOr { theta: f64 },
    /// Binary, ℓ₁-bounded weights.
    Logistic { w_max_1: f64 },
}

impl FamilyModel {
    pub fn cpt(v: usize, theta_min: f64) -> Result<Self> {
        let f = FamilyModel::Cpt { v, theta_min };
        f.validate()?;
        Ok(f)
    }

    pub fn gaussian(mu_a: f64, mu_b: f64, sigma_min: f64, sigma_max: f64) -> Result<Self> {
        let f = FamilyModel::Gaussian {
            mu_a,
            mu_b,
            sigma_min,
            sigma_max,
            w_max: None,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn noisy_or(theta: f64) -> Result<Self> {
        let f = FamilyModel::NoisyOr { theta };
        f.validate()?;
        Ok(f)
    }

    pub fn logistic(w_max_1: f64) -> Result<Self> {
        let f = FamilyModel::Logistic { w_max_1 };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Hyperparameter(msg));
        match *self {
            FamilyModel::Cpt { v, theta_min } => {
                if v < 2 {
                    return bad(format!("cpt needs v >= 2, got {v}"));
                }
                if !(theta_min > 0.0 && theta_min * v as f64 <= 1.0 + 1e-12) {
                    return bad(format!("cpt needs 0 < theta_min <= 1/v, got theta_min = {theta_min}, v = {v}"));
                }
            }
            FamilyModel::Gaussian {
                mu_a,
                mu_b,
                sigma_min,
                sigma_max,
                w_max,
            } => {
                if !(mu_a.is_finite() && mu_b.is_finite() && mu_a <= mu_b) {
                    return bad(format!("gaussian needs finite mu_a <= mu_b, got [{mu_a}, {mu_b}]"));
                }
                if !(sigma_min > 0.0 && sigma_min <= sigma_max && sigma_max.is_finite()) {
                    return bad(format!(
                        "gaussian needs 0 < sigma_min <= sigma_max, got [{sigma_min}, {sigma_max}]"
                    ));
                }
                if let Some(w) = w_max {
                    if !(w >= 0.0 && w.is_finite()) {
                        return bad(format!("gaussian w_max must be finite and non-negative, got {w}"));
                    }
                }
            }
            FamilyModel::NoisyOr { theta } => {
                if !(theta > 0.0 && theta < 1.0) {
                    return bad(format!("noisy-OR needs theta in (0, 1), got {theta}"));
                }
            }
            FamilyModel::Logistic { w_max_1 } => {
                if !(w_max_1 > 0.0 && w_max_1.is_finite()) {
                    return bad(format!("logistic needs w_max_1 > 0, got {w_max_1}"));
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            FamilyModel::Cpt { .. } => "cpt",
            FamilyModel::Gaussian { .. } => "gaussian",
            FamilyModel::NoisyOr { .. } => "noisy_or",
            FamilyModel::Logistic { .. } => "logistic",
        }
    }

    /// Number of states per variable; `None` for continuous families.
    pub fn support(&self) -> Option<usize> {
        match *self {
            FamilyModel::Cpt { v, .. } => Some(v),
            FamilyModel::Gaussian { .. } => None,
            FamilyModel::NoisyOr { .. } | FamilyModel::Logistic { .. } => Some(2),
        }
    }

    pub fn is_discrete(&self) -> bool {
        self.support().is_some()
    }

    /// Length of the natural-parameter vector.
    pub fn dim(&self) -> usize {
        match *self {
            FamilyModel::Cpt { v, .. } => v,
            _ => 1,
        }
    }
}

/// One node's conditional law for a fixed parent configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum Conditional {
    Categorical { probs: Vec<f64> },
    /// `p1 = P(X = 1)`.
    Bernoulli { p1: f64 },
    Gaussian { mean: f64, variance: f64 },
}

impl Conditional {
    pub fn log_prob(&self, x: f64) -> f64 {
        match self {
            Conditional::Categorical { probs } => {
                let j = x as usize;
                if x < 0.0 || x.fract() != 0.0 || j >= probs.len() {
                    return f64::NEG_INFINITY;
                }
                probs[j].ln()
            }
            Conditional::Bernoulli { p1 } => match x {
                0.0 => (1.0 - p1).ln(),
                1.0 => p1.ln(),
                _ => f64::NEG_INFINITY,
            },
            Conditional::Gaussian { mean, variance } => {
                -0.5 * (2.0 * std::f64::consts::PI * variance).ln() - (x - mean).powi(2) / (2.0 * variance)
            }
        }
    }

    /// Probability of a discrete outcome.
    pub fn prob(&self, x: usize) -> f64 {
        match self {
            Conditional::Categorical { probs } => probs.get(x).copied().unwrap_or(0.0),
            Conditional::Bernoulli { p1 } => match x {
                0 => 1.0 - p1,
                1 => *p1,
                _ => 0.0,
            },
            Conditional::Gaussian { .. } => 0.0,
        }
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Conditional::Categorical { probs } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (j, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return j as f64;
                    }
                }
                // Rounding left a sliver above the cumulative sum.
                probs.iter().rposition(|&p| p > 0.0).unwrap_or(0) as f64
            }
            Conditional::Bernoulli { p1 } => {
                if rng.random::<f64>() < *p1 {
                    1.0
                } else {
                    0.0
                }
            }
            Conditional::Gaussian { mean, variance } => {
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                mean + variance.sqrt() * z
            }
        }
    }
}
