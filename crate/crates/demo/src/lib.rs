//! Browser demo: three JSON-in/JSON-out operations over `bnlimits`,
//! exported to JavaScript through wasm-bindgen on `wasm32`.

use bnlimits::bounds::{bound_report, DeltaRule};
use bnlimits::ensembles::{count_bounds_restricted, count_essential_recurrence, ln_big, EnsembleSpec};
use bnlimits::expfam::{delta_bound, kl_exact, natural_param, random_pair, FamilyModel};
use bnlimits::rng::derived_rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest `m` accepted by the curve and count operations.
pub const MAX_M: usize = 400;
pub const MAX_PAIRS: usize = 20_000;

#[derive(Debug, Error)]
pub enum DemoError {
    #[error("bad request: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Lib(#[from] bnlimits::Error),
    #[error("{0}")]
    Range(String),
}

pub type Result<T> = std::result::Result<T, DemoError>;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveRequest {
    pub family: FamilyModel,
    /// In-degree cap; `None` for the dense ensemble.
    #[serde(default)]
    pub k: Option<usize>,
    pub m_from: usize,
    pub m_to: usize,
    #[serde(default)]
    pub rule: DeltaRule,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct CurvePoint {
    pub m: usize,
    pub threshold: f64,
    pub vacuous: bool,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct Curve {
    pub delta_max: f64,
    pub points: Vec<CurvePoint>,
}

/// Threshold `L` against `m` for the restricted ensemble.
pub fn threshold_curve(req: &CurveRequest) -> Result<Curve> {
    if req.m_from == 0 || req.m_from > req.m_to || req.m_to > MAX_M {
        return Err(DemoError::Range(format!("need 1 <= m_from <= m_to <= {MAX_M}")));
    }
    let mut delta_max = f64::NAN;
    let mut points = Vec::new();
    for m in req.m_from..=req.m_to {
        let spec = match req.k {
            Some(k) => {
                // The sparse count is only stated for 1 < k < m, m > 2.
                if k >= m || m <= 2 {
                    continue;
                }
                EnsembleSpec::restricted_sparse(m, k)?
            }
            None => EnsembleSpec::restricted(m)?,
        };
        let r = bound_report(&spec, &req.family, req.rule)?;
        delta_max = r.delta_max;
        points.push(CurvePoint {
            m,
            threshold: r.threshold,
            vacuous: r.vacuous,
        });
    }
    Ok(Curve { delta_max, points })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KlRequest {
    pub family: FamilyModel,
    pub pairs: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct KlPoint {
    pub kl: f64,
    pub delta: f64,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct KlScatter {
    pub points: Vec<KlPoint>,
    pub violations: usize,
}

/// Random conditional pairs of one family with their KL and `Δ(η₁, η₂)`.
pub fn kl_explorer(req: &KlRequest) -> Result<KlScatter> {
    if req.pairs == 0 || req.pairs > MAX_PAIRS {
        return Err(DemoError::Range(format!("pairs must be in 1..={MAX_PAIRS}")));
    }
    req.family.validate()?;
    let mut rng = derived_rng(req.seed, &[]);
    let mut points = Vec::with_capacity(req.pairs);
    for _ in 0..req.pairs {
        let (a, b) = random_pair(&req.family, &mut rng);
        let kl = kl_exact(&a, &b)?;
        let delta = delta_bound(&req.family, &natural_param(&req.family, &a)?, &natural_param(&req.family, &b)?)?;
        points.push(KlPoint { kl, delta });
    }
    let violations = points.iter().filter(|p| p.kl > p.delta + 1e-9).count();
    Ok(KlScatter { points, violations })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountRequest {
    pub m_to: usize,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct CountRow {
    pub m: usize,
    /// Exact, as a decimal string.
    pub count: String,
    pub ln_count: f64,
    pub ln_lower: f64,
    pub ln_upper: f64,
}

/// Essential-DAG counts with their closed-form bounds, `m = 1..=m_to`.
pub fn ensemble_counts(req: &CountRequest) -> Result<Vec<CountRow>> {
    if req.m_to == 0 || req.m_to > MAX_M {
        return Err(DemoError::Range(format!("m_to must be in 1..={MAX_M}")));
    }
    (1..=req.m_to)
        .map(|m| {
            let c = count_essential_recurrence(m);
            let (lo, hi) = count_bounds_restricted(m)?;
            Ok(CountRow {
                m,
                count: c.to_string(),
                ln_count: ln_big(&c),
                ln_lower: ln_big(&lo),
                ln_upper: ln_big(&hi),
            })
        })
        .collect()
}

fn via_json<Q: for<'de> Deserialize<'de>, A: Serialize>(input: &str, f: impl Fn(&Q) -> Result<A>) -> Result<String> {
    let req: Q = serde_json::from_str(input)?;
    Ok(serde_json::to_string(&f(&req)?)?)
}

pub fn threshold_curve_json(input: &str) -> Result<String> {
    via_json(input, threshold_curve)
}

pub fn kl_explorer_json(input: &str) -> Result<String> {
    via_json(input, kl_explorer)
}

pub fn ensemble_counts_json(input: &str) -> Result<String> {
    via_json(input, ensemble_counts)
}

#[cfg(target_arch = "wasm32")]
mod wasm {
    use wasm_bindgen::prelude::*;

    fn js(r: super::Result<String>) -> Result<String, JsError> {
        r.map_err(|e| JsError::new(&e.to_string()))
    }

    #[wasm_bindgen(js_name = thresholdCurve)]
    pub fn threshold_curve(input: &str) -> Result<String, JsError> {
        js(super::threshold_curve_json(input))
    }

    #[wasm_bindgen(js_name = klExplorer)]
    pub fn kl_explorer(input: &str) -> Result<String, JsError> {
        js(super::kl_explorer_json(input))
    }

    #[wasm_bindgen(js_name = ensembleCounts)]
    pub fn ensemble_counts(input: &str) -> Result<String, JsError> {
        js(super::ensemble_counts_json(input))
    }
}
