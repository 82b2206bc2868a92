use std::path::PathBuf;

use bnlimits::bounds::DeltaRule;
use bnlimits::ensembles::{EnsembleKind, EnsembleSpec};
use bnlimits::expfam::{FamilyModel, ParamPolicy};
use bnlimits::{Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "bnlimits", version, about = "Sample-complexity lower bounds for Bayesian network structure learning")]
pub struct Cli {
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    pub format: Format,
    /// Write output to PATH instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Report logarithmic quantities in bits instead of nats.
    #[arg(long, global = true)]
    pub bits: bool,
    /// Worker threads for the parallel routines (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ensemble sizes: exact recurrence, brute force, or closed-form bounds.
    Count(CountArgs),
    /// Sample-count threshold for an ensemble and family.
    Bound(BoundArgs),
    /// Thresholds for the four families, with and without an in-degree cap.
    Table1(Table1Args),
    /// Uniform draws from an ensemble.
    Sample(SampleArgs),
    /// Mutual information between data and structure, with its upper bounds.
    Mi(MiArgs),
    /// Randomised check that KL never exceeds the inner-product bound.
    VerifyKl(VerifyKlArgs),
    /// Exact check of the latent-variable Fano inequality on random models.
    VerifyFano(VerifyFanoArgs),
    /// Run an error-curve experiment from a config file.
    Simulate(ConfigArgs),
    /// Run an experiment and check the error floor below the threshold.
    VerifyThreshold(ConfigArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CountMethod {
    Recurrence,
    Brute,
    Bounds,
}

#[derive(Debug, Args)]
pub struct CountArgs {
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Layer sizes, bottom layer first.
    #[arg(long, value_delimiter = ',')]
    pub layers: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    pub method: Option<CountMethod>,
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    /// restricted | restricted_sparse | layered | layered_sparse
    #[arg(long)]
    pub ensemble: String,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Layer sizes, bottom layer first.
    #[arg(long, value_delimiter = ',')]
    pub layers: Option<Vec<usize>>,
}

fn need<T>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| Error::Usage(format!("--{flag} is required here")))
}

impl EnsembleArgs {
    pub fn spec(&self) -> Result<EnsembleSpec> {
        let kind: EnsembleKind = serde_json::from_value(serde_json::Value::String(self.ensemble.clone()))
            .map_err(|_| Error::Usage(format!("unknown ensemble '{}'", self.ensemble)))?;
        match kind {
            EnsembleKind::RestrictedAll => EnsembleSpec::restricted(need(self.m, "m")?),
            EnsembleKind::RestrictedSparse => EnsembleSpec::restricted_sparse(need(self.m, "m")?, need(self.k, "k")?),
            EnsembleKind::LayeredAll => EnsembleSpec::layered(need(self.layers.clone(), "layers")?),
            EnsembleKind::LayeredSparse => {
                EnsembleSpec::layered_sparse(need(self.layers.clone(), "layers")?, need(self.k, "k")?)
            }
        }
    }
}

#[derive(Debug, Default, Args)]
pub struct HyperArgs {
    /// CPT arity.
    #[arg(long)]
    pub v: Option<usize>,
    #[arg(long)]
    pub theta_min: Option<f64>,
    #[arg(long)]
    pub mu_a: Option<f64>,
    #[arg(long)]
    pub mu_b: Option<f64>,
    #[arg(long)]
    pub sigma_min: Option<f64>,
    #[arg(long)]
    pub sigma_max: Option<f64>,
    /// Gaussian ℓ₂ weight bound used by the published Δ_max.
    #[arg(long)]
    pub wmax: Option<f64>,
    /// Noisy-OR failure probability.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Logistic ℓ₁ weight bound.
    #[arg(long)]
    pub wmax1: Option<f64>,
}

impl HyperArgs {
    /// The family named `name`, every missing hyperparameter taken from `base`
    /// when given, otherwise required.
    pub fn family(&self, name: &str, base: Option<&FamilyModel>) -> Result<FamilyModel> {
        let f = match (name, base) {
            ("cpt", b) => {
                let (bv, bt) = match b {
                    Some(FamilyModel::Cpt { v, theta_min }) => (Some(*v), Some(*theta_min)),
                    _ => (None, None),
                };
                FamilyModel::Cpt {
                    v: self.v.or(bv).unwrap_or(2),
                    theta_min: need(self.theta_min.or(bt), "theta-min")?,
                }
            }
            ("gaussian", b) => {
                let d = match b {
                    Some(&FamilyModel::Gaussian {
                        mu_a,
                        mu_b,
                        sigma_min,
                        sigma_max,
                        w_max,
                    }) => [Some(mu_a), Some(mu_b), Some(sigma_min), Some(sigma_max), w_max],
                    _ => [None; 5],
                };
                let sigma_min = need(self.sigma_min.or(d[2]), "sigma-min")?;
                FamilyModel::Gaussian {
                    mu_a: need(self.mu_a.or(d[0]), "mu-a")?,
                    mu_b: need(self.mu_b.or(d[1]), "mu-b")?,
                    sigma_min,
                    sigma_max: self.sigma_max.or(d[3]).unwrap_or(sigma_min),
                    w_max: self.wmax.or(d[4]),
                }
            }
            ("noisy_or" | "noisy-or", b) => FamilyModel::NoisyOr {
                theta: need(
                    self.theta.or(match b {
                        Some(FamilyModel::NoisyOr { theta }) => Some(*theta),
                        _ => None,
                    }),
                    "theta",
                )?,
            },
            ("logistic", b) => FamilyModel::Logistic {
                w_max_1: need(
                    self.wmax1.or(match b {
                        Some(FamilyModel::Logistic { w_max_1 }) => Some(*w_max_1),
                        _ => None,
                    }),
                    "wmax1",
                )?,
            },
            (other, _) => return Err(Error::Usage(format!("unknown family '{other}'"))),
        };
        f.validate()?;
        Ok(f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    Published,
    Tight,
}

impl From<RuleArg> for DeltaRule {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::Published => DeltaRule::Published,
            RuleArg::Tight => DeltaRule::Tight,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Random,
    Extreme,
}

impl From<PolicyArg> for ParamPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Random => ParamPolicy::Random,
            PolicyArg::Extreme => ParamPolicy::Extreme,
        }
    }
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    /// cpt | gaussian | noisy_or | logistic
    #[arg(long)]
    pub family: String,
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[arg(long, value_enum, default_value_t = RuleArg::Published)]
    pub delta_rule: RuleArg,
}

#[derive(Debug, Args)]
pub struct Table1Args {
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub k: usize,
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[arg(long, value_enum, default_value_t = RuleArg::Published)]
    pub delta_rule: RuleArg,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
}

#[derive(Debug, Args)]
pub struct MiArgs {
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    #[arg(long)]
    pub family: String,
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[arg(long)]
    pub n: usize,
    /// Exact summation over every data set (the default).
    #[arg(long, conflicts_with = "mc")]
    pub exact: bool,
    /// Monte Carlo estimate with this many trials.
    #[arg(long)]
    pub mc: Option<usize>,
    /// Seed of the Monte Carlo draws.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Seed of the parameter map.
    #[arg(long, default_value_t = 0)]
    pub param_seed: u64,
    #[arg(long, value_enum, default_value_t = PolicyArg::Random)]
    pub policy: PolicyArg,
    #[arg(long, value_enum, default_value_t = RuleArg::Published)]
    pub delta_rule: RuleArg,
}

#[derive(Debug, Args)]
pub struct VerifyKlArgs {
    #[arg(long)]
    pub family: String,
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[arg(long, default_value_t = 100_000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-9)]
    pub tolerance: f64,
}

#[derive(Debug, Args)]
pub struct VerifyFanoArgs {
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-9)]
    pub tolerance: f64,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Flat key = value (TOML) experiment description.
    #[arg(long)]
    pub config: PathBuf,
}
