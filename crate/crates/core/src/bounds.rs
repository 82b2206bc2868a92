//! Per-family constants `Δ_max`, the sample-count thresholds below which
//! every decoder errs with probability at least 1/2, and the summary table.
//!
//! Thresholds are reported raw: small ensembles give non-positive values,
//! which are flagged `vacuous` rather than clamped.

use std::f64::consts::{FRAC_1_SQRT_2, LN_2};

use serde::{Deserialize, Serialize};

use crate::ensembles::{self, ln_factorial, EnsembleKind, EnsembleSpec};
use crate::expfam::{sigmoid, FamilyModel};
use crate::{Error, Result};

/// Which closed form supplies `Δ_max`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaRule {
    /// The published per-family constants.
    #[default]
    Published,
    /// Sharper constants from the exact range of each family's natural
    /// parameters; always valid where the published ones are, and also
    /// where they are not (see `delta_max_tight`).
    Tight,
}

/// The published per-family bound on `E[Δ(η_i, η_0)]`, in nats.
///
/// * CPT: `4 ln(1/θ_min)`
/// * Gaussian: `1 + 2 μ_max² (w_max² + 1) / σ_min²`, `w_max` defaulting to `1/√2`
/// * noisy-OR: `2 |ln(θ/(1−θ))|`
/// * logistic: `w¹_max / 2`
pub fn delta_max(family: &FamilyModel) -> Result<f64> {
    family.validate()?;
    Ok(match *family {
        FamilyModel::Cpt { theta_min, .. } => 4.0 * (1.0 / theta_min).ln(),
        FamilyModel::Gaussian {
            mu_a,
            mu_b,
            sigma_min,
            w_max,
            ..
        } => {
            let mu_max = mu_a.abs().max(mu_b.abs());
            let w = w_max.unwrap_or(FRAC_1_SQRT_2);
            1.0 + 2.0 * mu_max * mu_max * (w * w + 1.0) / (sigma_min * sigma_min)
        }
        FamilyModel::NoisyOr { theta } => 2.0 * (theta / (1.0 - theta)).ln().abs(),
        FamilyModel::Logistic { w_max_1 } => w_max_1 / 2.0,
    })
}

/// Hölder bounds over the exact parameter ranges:
///
/// * CPT: `‖η₁−η₂‖_∞ ≤ ln((1−(v−1)θ_min)/θ_min)` and `‖μ₁−μ₂‖₁ ≤ 2(1−vθ_min)`.
/// * Gaussian: the conditional mean of a non-root has `|E μ_i| ≤ |μ| ‖w_i‖₁ ≤ |μ|/√2`
///   whatever the weight signs, so `E Δ ≤ 1 + 2 μ_max² (1 + 1/√2)² / σ_min²`.
/// * noisy-OR: `Δ` as a function of the child's failure probability
///   `t ∈ [θ², θ]` is `(logit t + logit θ)(t + θ − 1)`, a product of two
///   increasing factors with a common root, so the sup sits at an endpoint.
/// * logistic: `z (σ(z) − 1/2)` is even and increasing in `|z| ≤ w¹_max`.
pub fn delta_max_tight(family: &FamilyModel) -> Result<f64> {
    family.validate()?;
    Ok(match *family {
        FamilyModel::Cpt { v, theta_min } => {
            let v = v as f64;
            let spread = 1.0 - v * theta_min;
            2.0 * spread * ((1.0 - (v - 1.0) * theta_min) / theta_min).ln()
        }
        FamilyModel::Gaussian {
            mu_a, mu_b, sigma_min, ..
        } => {
            let mu_max = mu_a.abs().max(mu_b.abs());
            1.0 + 2.0 * mu_max * mu_max * (1.0 + FRAC_1_SQRT_2).powi(2) / (sigma_min * sigma_min)
        }
        FamilyModel::NoisyOr { theta } => {
            let f = |t: f64| (logit(t) + logit(theta)) * (t + theta - 1.0);
            f(theta).max(f(theta * theta))
        }
        FamilyModel::Logistic { w_max_1 } => w_max_1 * (sigmoid(w_max_1) - 0.5),
    })
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn delta_for(family: &FamilyModel, rule: DeltaRule) -> Result<f64> {
    match rule {
        DeltaRule::Published => delta_max(family),
        DeltaRule::Tight => delta_max_tight(family),
    }
}

/// Which threshold family produced a report.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdForm {
    /// Built from the ensemble's closed-form log-size bound.
    Ensemble,
    /// The simplified restricted-ensemble form with remainder `R(m, k)`.
    Simplified,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub ensemble: EnsembleSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilyModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_rule: Option<DeltaRule>,
    pub form: ThresholdForm,
    /// Nats.
    pub delta_max: f64,
    /// Lower bound on `ln |ensemble|`, nats.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_size_lb: Option<f64>,
    /// Raw threshold (may be fractional or non-positive).
    #[serde(rename = "threshold_L")]
    pub threshold: f64,
    /// `(log_size_lb/2 − ln 2) / (m_eff Δ)`: the sample count at which the
    /// generic Fano error bound reaches 1/2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold_fano: Option<f64>,
    pub vacuous: bool,
    /// `R(m, k)` for the simplified sparse form.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remainder: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl BoundReport {
    /// Largest integer sample count covered by the bound (`None` if vacuous).
    pub fn floor(&self) -> Option<u64> {
        (self.threshold >= 1.0).then(|| self.threshold.floor() as u64)
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Domain(format!(
            "Δ_max must be positive and finite, got {delta}; a zero constant means the family \
             cannot separate structures (e.g. noisy-OR at θ = 1/2) and no finite threshold exists"
        )));
    }
    Ok(())
}

/// Number of nodes whose conditionals can differ between members.
fn effective_nodes(spec: &EnsembleSpec) -> usize {
    spec.m() - spec.top_layer_size()
}

/// Sample count at which `1 − (n m_eff Δ + ln 2)/log_size` falls to 1/2.
pub fn fano_threshold(log_size: f64, m_eff: usize, delta: f64) -> f64 {
    (log_size / 2.0 - LN_2) / (m_eff as f64 * delta)
}

/// The ensemble threshold for a given `Δ_max`.
pub fn threshold(spec: &EnsembleSpec, delta: f64) -> Result<BoundReport> {
    check_delta(delta)?;
    let m_eff = effective_nodes(spec);
    if m_eff == 0 {
        return Err(Error::Domain(format!(
            "{spec} has a single member; no threshold exists"
        )));
    }
    let lb = ensembles::log_size_lower_bound(spec)?;
    let m = spec.m() as f64;
    let me = m_eff as f64;
    let mut notes = Vec::new();
    let value = match spec.kind() {
        EnsembleKind::RestrictedAll => {
            notes.push(
                "this closed form equals twice the generic Fano rearrangement (threshold_fano)"
                    .to_string(),
            );
            LN_2 / delta * ((m - 3.0) / 2.0 - 1.0 / m)
        }
        EnsembleKind::RestrictedSparse => {
            let k_int = spec.k().expect("sparse spec has k");
            let k = k_int as f64;
            notes.push(
                "uses (k(k-3)/2 - 1) ln 2, i.e. the log-size bound's (k(k-3)/2 + 1) ln 2 minus 2 ln 2"
                    .to_string(),
            );
            (k * (ln_factorial(spec.m() as u64 - 2) - ln_factorial(k_int as u64) - (m - k - 2.0) * k.ln())
                + (k * (k - 3.0) / 2.0 - 1.0) * LN_2)
                / (2.0 * m * delta)
        }
        EnsembleKind::LayeredAll => {
            let cross: f64 = spec.layers().windows(2).map(|w| (w[0] * w[1]) as f64).sum();
            LN_2 / (2.0 * me * delta) * (cross - 2.0)
        }
        EnsembleKind::LayeredSparse => {
            let k = spec.k().expect("sparse spec has k") as f64;
            let s: f64 = spec
                .layers()
                .windows(2)
                .map(|w| w[0] as f64 * (w[1] as f64 / k).ln())
                .sum();
            (k * s - 2.0 * LN_2) / (2.0 * me * delta)
        }
    };
    Ok(BoundReport {
        ensemble: spec.clone(),
        family: None,
        delta_rule: None,
        form: ThresholdForm::Ensemble,
        delta_max: delta,
        log_size_lb: Some(lb),
        threshold: value,
        threshold_fano: Some(fano_threshold(lb, m_eff, delta)),
        vacuous: value <= 0.0,
        remainder: None,
        notes,
    })
}

/// Threshold for `spec` under `family`'s `Δ_max`.
pub fn bound_report(spec: &EnsembleSpec, family: &FamilyModel, rule: DeltaRule) -> Result<BoundReport> {
    let delta = delta_for(family, rule)?;
    let mut r = threshold(spec, delta)?;
    r.family = Some(family.clone());
    r.delta_rule = Some(rule);
    Ok(r)
}

/// `R(m, k) = (k/m){(m−2) + 2 ln(m−2) + ln k! + (m−k−2) ln k} + ln 2 / m`.
pub fn remainder(m: usize, k: usize) -> f64 {
    let (mf, kf) = (m as f64, k as f64);
    kf / mf * ((mf - 2.0) + 2.0 * (mf - 2.0).ln() + ln_factorial(k as u64) + (mf - kf - 2.0) * kf.ln())
        + LN_2 / mf
}

/// The simplified restricted-ensemble thresholds: identical to `threshold`
/// without a cap, and `(1/2Δ)(k ln(m−2) + k(k−3) ln 2/(2m) − R(m,k))` with one.
pub fn threshold_simplified(m: usize, k: Option<usize>, delta: f64) -> Result<BoundReport> {
    check_delta(delta)?;
    let Some(k) = k else {
        let spec = EnsembleSpec::restricted(m)?;
        let mut r = threshold(&spec, delta)?;
        r.form = ThresholdForm::Simplified;
        return Ok(r);
    };
    if m < 3 || k == 0 || k >= m {
        return Err(Error::Domain(format!(
            "the simplified sparse threshold needs m >= 3 and 1 <= k < m (got m = {m}, k = {k})"
        )));
    }
    let spec = EnsembleSpec::restricted_sparse(m, k)?;
    let (mf, kf) = (m as f64, k as f64);
    let r = remainder(m, k);
    let value = (kf * (mf - 2.0).ln() + kf * (kf - 3.0) * LN_2 / (2.0 * mf) - r) / (2.0 * delta);
    let lb = ensembles::log_size_lower_bound(&spec).ok();
    Ok(BoundReport {
        ensemble: spec,
        family: None,
        delta_rule: None,
        form: ThresholdForm::Simplified,
        delta_max: delta,
        log_size_lb: lb,
        threshold: value,
        threshold_fano: lb.map(|lb| fano_threshold(lb, m, delta)),
        vacuous: value <= 0.0,
        remainder: Some(r),
        notes: Vec::new(),
    })
}

/// One family's row of the summary table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub family: FamilyModel,
    pub dense: BoundReport,
    pub sparse: BoundReport,
}

/// The four families, each with and without an in-degree cap `k`, using the
/// simplified restricted-ensemble thresholds.
pub fn table1(m: usize, k: usize, families: &[FamilyModel], rule: DeltaRule) -> Result<Vec<Table1Row>> {
    families
        .iter()
        .map(|f| {
            let delta = delta_for(f, rule)?;
            let tag = |mut r: BoundReport| {
                r.family = Some(f.clone());
                r.delta_rule = Some(rule);
                r
            };
            Ok(Table1Row {
                family: f.clone(),
                dense: tag(threshold_simplified(m, None, delta)?),
                sparse: tag(threshold_simplified(m, Some(k), delta)?),
            })
        })
        .collect()
}

/// Default hyperparameters for the summary table.
pub fn default_table_families() -> Vec<FamilyModel> {
    vec![
        FamilyModel::Cpt {
            v: 2,
            theta_min: 0.1,
        },
        FamilyModel::Gaussian {
            mu_a: -1.0,
            mu_b: 1.0,
            sigma_min: 1.0,
            sigma_max: 2.0,
            w_max: None,
        },
        FamilyModel::NoisyOr { theta: 0.9 },
        FamilyModel::Logistic { w_max_1: 1.0 },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn delta_max_examples() {
        assert!(close(delta_max(&FamilyModel::cpt(2, (-1f64).exp()).unwrap()).unwrap(), 4.0, 1e-12));
        assert_eq!(delta_max(&FamilyModel::noisy_or(0.5).unwrap()).unwrap(), 0.0);
        assert_eq!(delta_max(&FamilyModel::logistic(1.0).unwrap()).unwrap(), 0.5);
        let g = FamilyModel::gaussian(-2.0, 1.0, 1.0, 1.0).unwrap();
        assert!(close(delta_max(&g).unwrap(), 1.0 + 8.0 * 1.5, 1e-12));
    }

    #[test]
    fn tight_cpt_at_near_uniform_floor() {
        let d = delta_max_tight(&FamilyModel::cpt(2, 0.45).unwrap()).unwrap();
        assert!(close(d, 0.2 * (0.55f64 / 0.45).ln(), 1e-15));
        assert!(d < delta_max(&FamilyModel::cpt(2, 0.45).unwrap()).unwrap());
    }

    #[test]
    fn threshold_examples() {
        let r = threshold(&EnsembleSpec::restricted(3).unwrap(), LN_2).unwrap();
        assert!(close(r.threshold, -1.0 / 3.0, 1e-12) && r.vacuous);
        let r = threshold(&EnsembleSpec::restricted(13).unwrap(), LN_2).unwrap();
        assert!(close(r.threshold, 5.0 - 1.0 / 13.0, 1e-12) && !r.vacuous);
        let r = threshold(&EnsembleSpec::layered(vec![1, 4]).unwrap(), 1.0).unwrap();
        assert!(close(r.threshold, LN_2, 1e-12));
        assert!(matches!(
            threshold(&EnsembleSpec::restricted(5).unwrap(), 0.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            threshold(&EnsembleSpec::layered(vec![3]).unwrap(), 1.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn noisy_or_half_is_rejected() {
        let e = bound_report(
            &EnsembleSpec::restricted(6).unwrap(),
            &FamilyModel::noisy_or(0.5).unwrap(),
            DeltaRule::Published,
        );
        assert!(matches!(e, Err(Error::Domain(_))));
    }

    #[test]
    fn simplified_examples() {
        for m in [3, 10, 40] {
            let a = threshold_simplified(m, None, 0.7).unwrap();
            let b = threshold(&EnsembleSpec::restricted(m).unwrap(), 0.7).unwrap();
            assert_eq!(a.threshold, b.threshold);
        }
        let r = threshold_simplified(100, Some(2), 1.0).unwrap();
        let want = 0.5 * (2.0 * 98f64.ln() + (2.0 * (2.0 - 3.0) * LN_2) / 200.0 - remainder(100, 2));
        assert!(close(r.threshold, want, 1e-12));
        assert!(matches!(threshold_simplified(10, Some(0), 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn table_has_eight_cells() {
        let t = table1(50, 3, &default_table_families(), DeltaRule::Published).unwrap();
        assert_eq!(t.len(), 4);
        assert!(t.iter().all(|r| r.dense.threshold.is_finite() && r.sparse.threshold.is_finite()));
    }
}
