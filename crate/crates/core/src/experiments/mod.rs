//! Seeded Monte-Carlo harness: draw a member uniformly, sample data from it
//! under a fixed parameter map, decode over the whole ensemble, and count how
//! often the decoded graph leaves the true Markov equivalence class.

mod decode;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use decode::{decode, free_parameters, profile_log_likelihood, Decoder};

use crate::bounds::{self, BoundReport, DeltaRule};
use crate::dag::markov_equivalent;
use crate::ensembles::{Ensemble, EnsembleKind, EnsembleSpec};
use crate::expfam::{FamilyModel, ParamMap, ParamPolicy};
use crate::rng;
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;
/// Fewer trials than this make the Wilson intervals unreliable.
pub const MIN_TRIALS: usize = 100;
const WILSON_Z: f64 = 1.96;
/// Step used when raising `θ_min` to make the threshold non-vacuous.
pub const THETA_STEP: f64 = 0.005;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub ensemble: EnsembleSpec,
    pub family: FamilyModel,
    pub param_seed: u64,
    pub data_seed: u64,
    pub n_grid: Vec<usize>,
    pub trials: usize,
    #[serde(default)]
    pub decoder: Decoder,
    #[serde(default)]
    pub delta_rule: DeltaRule,
    #[serde(default)]
    pub policy: ParamPolicy,
}

/// The on-disk form: one flat table of scalar keys.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlatConfig {
    ensemble: String,
    m: Option<usize>,
    k: Option<usize>,
    layers: Option<Vec<usize>>,
    family: String,
    v: Option<usize>,
    theta_min: Option<f64>,
    mu_a: Option<f64>,
    mu_b: Option<f64>,
    sigma_min: Option<f64>,
    sigma_max: Option<f64>,
    w_max: Option<f64>,
    theta: Option<f64>,
    w_max_1: Option<f64>,
    param_seed: u64,
    data_seed: u64,
    n_grid: Vec<usize>,
    trials: usize,
    decoder: Option<Decoder>,
    delta_rule: Option<DeltaRule>,
    policy: Option<ParamPolicy>,
}

fn need<T>(v: Option<T>, key: &str) -> Result<T> {
    v.ok_or_else(|| Error::Usage(format!("missing key '{key}'")))
}

impl FlatConfig {
    fn into_config(self) -> Result<ExperimentConfig> {
        let kind: EnsembleKind = serde_json::from_value(serde_json::Value::String(self.ensemble.clone()))
            .map_err(|_| Error::Usage(format!("unknown ensemble '{}'", self.ensemble)))?;
        let ensemble = match kind {
            EnsembleKind::RestrictedAll => EnsembleSpec::restricted(need(self.m, "m")?)?,
            EnsembleKind::RestrictedSparse => EnsembleSpec::restricted_sparse(need(self.m, "m")?, need(self.k, "k")?)?,
            EnsembleKind::LayeredAll => EnsembleSpec::layered(need(self.layers, "layers")?)?,
            EnsembleKind::LayeredSparse => EnsembleSpec::layered_sparse(need(self.layers, "layers")?, need(self.k, "k")?)?,
        };
        let family = match self.family.as_str() {
            "cpt" => FamilyModel::cpt(self.v.unwrap_or(2), need(self.theta_min, "theta_min")?)?,
            "gaussian" => {
                let f = FamilyModel::Gaussian {
                    mu_a: need(self.mu_a, "mu_a")?,
                    mu_b: need(self.mu_b, "mu_b")?,
                    sigma_min: need(self.sigma_min, "sigma_min")?,
                    sigma_max: need(self.sigma_max, "sigma_max")?,
                    w_max: self.w_max,
                };
                f.validate()?;
                f
            }
            "noisy_or" => FamilyModel::noisy_or(need(self.theta, "theta")?)?,
            "logistic" => FamilyModel::logistic(need(self.w_max_1, "w_max_1")?)?,
            other => return Err(Error::Usage(format!("unknown family '{other}'"))),
        };
        let cfg = ExperimentConfig {
            ensemble,
            family,
            param_seed: self.param_seed,
            data_seed: self.data_seed,
            n_grid: self.n_grid,
            trials: self.trials,
            decoder: self.decoder.unwrap_or_default(),
            delta_rule: self.delta_rule.unwrap_or_default(),
            policy: self.policy.unwrap_or_default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.family.validate()?;
        if self.trials < MIN_TRIALS {
            return Err(Error::Usage(format!(
                "at least {MIN_TRIALS} trials per grid point are required, got {}",
                self.trials
            )));
        }
        if self.n_grid.is_empty() {
            return Err(Error::Usage("n_grid is empty".into()));
        }
        Ok(())
    }

    /// Parses the flat key/value (TOML) form.
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let flat: FlatConfig = toml::from_str(s).map_err(|e| Error::Usage(format!("bad config: {e}")))?;
        flat.into_config()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let flat: FlatConfig = toml::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        flat.into_config()
    }

    pub fn param_map(&self) -> Result<ParamMap> {
        Ok(ParamMap::new(self.family.clone(), self.param_seed)?.with_policy(self.policy))
    }
}

/// One grid point of an error curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorPoint {
    pub n: usize,
    pub trials: usize,
    pub failures: usize,
    pub error_rate: f64,
    /// Binomial standard error `sqrt(p(1−p)/trials)`.
    pub std_error: f64,
    pub wilson_ci_low: f64,
    pub wilson_ci_high: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub schema: u32,
    /// Seconds since the Unix epoch; the only field that differs between reruns.
    pub timestamp: u64,
    pub config: ExperimentConfig,
    pub decoder: Decoder,
    pub ensemble_size: usize,
    pub delta_max: Option<f64>,
    /// `None` when no threshold exists (single-member ensemble).
    #[serde(rename = "threshold_L")]
    pub threshold: Option<f64>,
    pub theoretical_floor: f64,
    pub points: Vec<ErrorPoint>,
}

/// Wilson score interval for `k` successes out of `n`.
pub fn wilson_interval(k: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = z / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    // The interval always contains p; clamp away rounding at the edges.
    ((centre - half).clamp(0.0, p), (centre + half).clamp(p, 1.0))
}

fn point(n: usize, trials: usize, failures: usize) -> ErrorPoint {
    let p = failures as f64 / trials as f64;
    let (lo, hi) = wilson_interval(failures, trials, WILSON_Z);
    ErrorPoint {
        n,
        trials,
        failures,
        error_rate: p,
        std_error: (p * (1.0 - p) / trials as f64).sqrt(),
        wilson_ci_low: lo,
        wilson_ci_high: hi,
    }
}

fn threshold_of(cfg: &ExperimentConfig) -> Result<Option<BoundReport>> {
    match bounds::bound_report(&cfg.ensemble, &cfg.family, cfg.delta_rule) {
        Ok(r) => Ok(Some(r)),
        Err(Error::Domain(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Estimates the decoder's error `P(ψ(S) ∉ [G])` at every grid point.
///
/// Trial `t` at grid index `j` draws everything from seeds derived from
/// `(data_seed, j, t)`, so the result is independent of scheduling.
pub fn run_error_curve(cfg: &ExperimentConfig, d: Decoder) -> Result<ExperimentResult> {
    cfg.validate()?;
    let pm = cfg.param_map()?;
    let ens = Ensemble::cached(&cfg.ensemble)?;
    let members = ens.members();
    let nets = members.iter().map(|g| pm.materialize(g)).collect::<Result<Vec<_>>>()?;
    // Equivalence is a property of the pair, so tabulate it once.
    let g = members.len();
    let equiv: Vec<bool> = (0..g * g)
        .into_par_iter()
        .map(|ij| markov_equivalent(&members[ij / g], &members[ij % g]))
        .collect::<Result<_>>()?;

    let mut points = Vec::with_capacity(cfg.n_grid.len());
    for (j, &n) in cfg.n_grid.iter().enumerate() {
        let outcomes: Vec<bool> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let mut r = rng::derived_rng(cfg.data_seed, &[j as u64, t as u64]);
                let truth = r.random_range(0..g);
                let data = nets[truth].forward_sample(n, r.random());
                let guess = decode::decode_index(d, &data, members, &nets, &pm)?;
                Ok(!equiv[truth * g + guess])
            })
            .collect::<Result<_>>()?;
        let failures = outcomes.iter().filter(|&&f| f).count();
        points.push(point(n, cfg.trials, failures));
    }

    let report = threshold_of(cfg)?;
    Ok(ExperimentResult {
        schema: SCHEMA_VERSION,
        timestamp: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|t| t.as_secs())
            .unwrap_or(0),
        config: cfg.clone(),
        decoder: d,
        ensemble_size: g,
        delta_max: report.as_ref().map(|r| r.delta_max),
        threshold: report.map(|r| r.threshold),
        theoretical_floor: 0.5,
        points,
    })
}

/// Error of the tie-broken decoder on empty data:
/// `1 − (members equivalent to member 0)/|ensemble|`.
pub fn error_at_zero(spec: &EnsembleSpec) -> Result<f64> {
    let ens = Ensemble::cached(spec)?;
    let first = &ens.members()[0];
    let mut hits = 0usize;
    for g in ens.members() {
        if markov_equivalent(first, g)? {
            hits += 1;
        }
    }
    Ok(1.0 - hits as f64 / ens.len() as f64)
}

/// Raises a CPT family's `θ_min` in steps of [`THETA_STEP`] until the
/// threshold reaches one sample. Returns the (possibly unchanged) `θ_min`,
/// or `None` when no admissible value works or the family is not a CPT.
pub fn adapt_theta_min(spec: &EnsembleSpec, family: &FamilyModel, rule: DeltaRule) -> Result<Option<f64>> {
    let FamilyModel::Cpt { v, theta_min } = *family else {
        return Ok(None);
    };
    let ceiling = 1.0 / v as f64;
    let mut t = theta_min;
    while t < ceiling {
        let f = FamilyModel::Cpt { v, theta_min: t };
        match bounds::bound_report(spec, &f, rule) {
            Ok(r) if r.threshold >= 1.0 => return Ok(Some(t)),
            Ok(_) | Err(Error::Domain(_)) => {}
            Err(e) => return Err(e),
        }
        // Round to the step grid so the chosen value prints cleanly.
        t = ((t + THETA_STEP) / THETA_STEP).round() * THETA_STEP;
    }
    Ok(None)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointCheck {
    pub n: usize,
    pub error_rate: f64,
    pub std_error: f64,
    /// `error_rate + 2·SE ≥ 1/2`.
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub verdict: Verdict,
    pub threshold: Option<f64>,
    pub floor: Option<u64>,
    pub delta_rule: DeltaRule,
    /// Set when `θ_min` had to be raised to make the threshold non-vacuous.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adapted_theta_min: Option<f64>,
    /// Grid points at or below the floor.
    pub checked: Vec<PointCheck>,
    /// Grid points above the floor, reported without a claim.
    pub informational: Vec<ErrorPoint>,
    pub diagnostics: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<ExperimentResult>,
}

fn skipped(cfg: &ExperimentConfig, threshold: Option<f64>, msg: String) -> ThresholdReport {
    ThresholdReport {
        verdict: Verdict::Skipped,
        threshold,
        floor: None,
        delta_rule: cfg.delta_rule,
        adapted_theta_min: None,
        checked: Vec::new(),
        informational: Vec::new(),
        diagnostics: vec![msg],
        result: None,
    }
}

/// Checks that the decoder errs with probability at least 1/2 (up to two
/// standard errors) at every grid point `n ≤ ⌊L⌋`.
///
/// A vacuous CPT threshold triggers [`adapt_theta_min`]; the run then uses
/// the raised value, which is recorded in the report.
pub fn verify_threshold(cfg: &ExperimentConfig, d: Decoder) -> Result<ThresholdReport> {
    cfg.validate()?;
    let ens = Ensemble::cached(&cfg.ensemble)?;
    if ens.len() <= 1 {
        return Ok(skipped(
            cfg,
            None,
            format!("{} has a single member; the threshold is undefined", cfg.ensemble),
        ));
    }
    let mut cfg = cfg.clone();
    let mut adapted = None;
    let mut report = threshold_of(&cfg)?;
    if report.as_ref().and_then(BoundReport::floor).is_none() {
        let before = report.as_ref().map(|r| r.threshold);
        match adapt_theta_min(&cfg.ensemble, &cfg.family, cfg.delta_rule)? {
            Some(t) => {
                if let FamilyModel::Cpt { theta_min, .. } = &mut cfg.family {
                    *theta_min = t;
                }
                adapted = Some(t);
                report = threshold_of(&cfg)?;
            }
            None => {
                return Ok(skipped(
                    &cfg,
                    before,
                    format!(
                        "threshold {} is below one sample under the {:?} rule for {} and no admissible θ_min fixes it",
                        before.map_or("undefined".to_string(), |t| format!("{t:.6}")),
                        cfg.delta_rule,
                        cfg.family.name()
                    ),
                ))
            }
        }
    }
    let report = report.expect("threshold exists after adaptation");
    let floor = report.floor().expect("threshold ≥ 1");
    let result = run_error_curve(&cfg, d)?;
    let (below, above): (Vec<_>, Vec<_>) = result.points.iter().cloned().partition(|p| p.n as u64 <= floor);
    let mut diagnostics = Vec::new();
    if !above.is_empty() {
        diagnostics.push(format!(
            "{} grid point(s) above floor(L) = {floor}: no theoretical claim, informational only",
            above.len()
        ));
    }
    let checked: Vec<PointCheck> = below
        .iter()
        .map(|p| PointCheck {
            n: p.n,
            error_rate: p.error_rate,
            std_error: p.std_error,
            ok: p.error_rate + 2.0 * p.std_error >= 0.5,
        })
        .collect();
    let verdict = if checked.is_empty() {
        diagnostics.push(format!("no grid point at or below floor(L) = {floor}"));
        Verdict::Skipped
    } else if checked.iter().all(|c| c.ok) {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(ThresholdReport {
        verdict,
        threshold: Some(report.threshold),
        floor: Some(floor),
        delta_rule: cfg.delta_rule,
        adapted_theta_min: adapted,
        checked,
        informational: above,
        diagnostics,
        result: Some(result),
    })
}

/// The CSV companion of a result file: `foo.json` → `foo.csv`.
pub fn csv_path(json_path: &Path) -> PathBuf {
    json_path.with_extension("csv")
}

pub fn to_json(result: &ExperimentResult) -> Result<String> {
    serde_json::to_string_pretty(result).map_err(|e| Error::Usage(format!("serialisation failed: {e}")))
}

pub fn to_csv(result: &ExperimentResult) -> String {
    let mut out = String::from("n,error,ci_low,ci_high,threshold\n");
    let th = result.threshold.map(|t| t.to_string()).unwrap_or_default();
    for p in &result.points {
        out.push_str(&format!("{},{},{},{},{}\n", p.n, p.error_rate, p.wilson_ci_low, p.wilson_ci_high, th));
    }
    out
}

/// Writes `path` (JSON) and its CSV companion.
pub fn persist(result: &ExperimentResult, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_json(result)? + "\n").map_err(|e| Error::io(path, e))?;
    let csv = csv_path(path);
    fs::write(&csv, to_csv(result)).map_err(|e| Error::io(csv, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<ExperimentResult> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let r: ExperimentResult = serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    if r.schema != SCHEMA_VERSION {
        return Err(Error::Format {
            path: path.to_path_buf(),
            msg: format!("unsupported schema {}", r.schema),
        });
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(spec: EnsembleSpec, family: FamilyModel, n_grid: Vec<usize>) -> ExperimentConfig {
        ExperimentConfig {
            ensemble: spec,
            family,
            param_seed: 11,
            data_seed: 12,
            n_grid,
            trials: 200,
            decoder: Decoder::OracleBayes,
            delta_rule: DeltaRule::Published,
            policy: ParamPolicy::Random,
        }
    }

    #[test]
    fn wilson_brackets_the_rate() {
        for (k, n) in [(0, 100), (50, 100), (100, 100), (3, 400)] {
            let (lo, hi) = wilson_interval(k, n, 1.96);
            let p = k as f64 / n as f64;
            assert!(lo <= p && p <= hi, "{k}/{n}: [{lo}, {hi}]");
        }
        // Textbook value: 50/100 at 95% is [0.4038, 0.5962].
        let (lo, hi) = wilson_interval(50, 100, 1.96);
        assert!((lo - 0.4038).abs() < 1e-4 && (hi - 0.5962).abs() < 1e-4);
    }

    #[test]
    fn single_member_never_errs() {
        let spec = EnsembleSpec::restricted(2).unwrap();
        let c = cfg(spec, FamilyModel::cpt(2, 0.1).unwrap(), vec![0, 5]);
        let r = run_error_curve(&c, Decoder::OracleBayes).unwrap();
        assert_eq!(r.ensemble_size, 1);
        assert!(r.points.iter().all(|p| p.failures == 0));
        let v = verify_threshold(&c, Decoder::OracleBayes).unwrap();
        assert_eq!(v.verdict, Verdict::Skipped);
    }

    #[test]
    fn indistinguishable_members_err_three_quarters() {
        let spec = EnsembleSpec::restricted(3).unwrap();
        let c = cfg(spec.clone(), FamilyModel::cpt(2, 0.5).unwrap(), vec![0, 3, 20]);
        let r = run_error_curve(&c, Decoder::OracleBayes).unwrap();
        assert_eq!(error_at_zero(&spec).unwrap(), 0.75);
        for p in &r.points {
            assert!(p.wilson_ci_low <= 0.75 && 0.75 <= p.wilson_ci_high, "{p:?}");
        }
    }

    #[test]
    fn flat_config_round_trip() {
        let text = r#"
            ensemble = "restricted_all"
            m = 4
            family = "cpt"
            v = 2
            theta_min = 0.45
            param_seed = 1
            data_seed = 2
            n_grid = [0, 1, 2]
            trials = 400
            decoder = "oracle_bayes"
            delta_rule = "tight"
            policy = "extreme"
        "#;
        let c = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(c.ensemble, EnsembleSpec::restricted(4).unwrap());
        assert_eq!(c.delta_rule, DeltaRule::Tight);
        assert_eq!(c.policy, ParamPolicy::Extreme);
        assert!(ExperimentConfig::from_toml_str(&text.replace("m = 4", "m = 4\nbogus = 1")).is_err());
        assert!(ExperimentConfig::from_toml_str(&text.replace("trials = 400", "trials = 10")).is_err());
    }

    #[test]
    fn published_rule_cannot_be_adapted_for_small_cpt() {
        let spec = EnsembleSpec::restricted(4).unwrap();
        let f = FamilyModel::cpt(2, 0.45).unwrap();
        assert_eq!(adapt_theta_min(&spec, &f, DeltaRule::Published).unwrap(), None);
        assert_eq!(adapt_theta_min(&spec, &f, DeltaRule::Tight).unwrap(), Some(0.45));
        let low = FamilyModel::cpt(2, 0.1).unwrap();
        let t = adapt_theta_min(&spec, &low, DeltaRule::Tight).unwrap().unwrap();
        assert!(t > 0.1 && t < 0.5);
    }
}
