mod args;
mod output;

use std::process::ExitCode;

use args::{BoundArgs, Cli, Command, CountArgs, CountMethod, Format, MiArgs, SampleArgs, Table1Args};
use bnlimits::bounds::{bound_report, default_table_families, table1};
use bnlimits::ensembles::{
    count_bounds_restricted, count_bounds_sparse, count_essential_brute, count_essential_recurrence, count_layered,
    ln_big, sample_with, BigCount, Ensemble, EnsembleSpec,
};
use bnlimits::experiments::{self, persist, run_error_curve, verify_threshold, ExperimentConfig, Verdict};
use bnlimits::expfam::{verify_kl, ParamMap};
use bnlimits::infotheory::{mi_report, run_fano_trials, MiMethod};
use bnlimits::rng::derived_rng;
use bnlimits::Error;
use clap::Parser;
use serde_json::{json, Value};

/// Keys holding logarithmic quantities, converted by `--bits`.
const LOG_KEYS: &[&str] = &[
    "delta_max",
    "log_size_lb",
    "ln_count",
    "ln_lower",
    "ln_upper",
    "estimate",
    "upper_bound_kl",
    "upper_bound_assumption",
    "max_kl",
    "max_delta",
    "estimate_std_error",
];

/// What a command produced.
struct Outcome {
    value: Value,
    /// Pre-rendered CSV overriding the generic flattening.
    csv: Option<String>,
    /// Exit with 4 after printing.
    failed: bool,
    /// Output already written elsewhere; print nothing.
    silent: bool,
}

impl Outcome {
    fn ok(value: Value) -> Self {
        Outcome {
            value,
            csv: None,
            failed: false,
            silent: false,
        }
    }
}

#[derive(Debug)]
enum CliError {
    Lib(Error),
    Json(serde_json::Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Json(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn exit_code(e: &CliError) -> u8 {
    match e {
        CliError::Lib(Error::Capability(_)) => 3,
        CliError::Lib(Error::Io { .. }) | CliError::Json(_) => 1,
        CliError::Lib(_) => 2,
    }
}

/// Exact counts as JSON numbers while they fit in `u64`, decimal strings beyond.
fn big(x: &BigCount) -> Value {
    match u64::try_from(x) {
        Ok(v) => json!(v),
        Err(_) => json!(x.to_string()),
    }
}

fn count(a: &CountArgs) -> CliResult<Value> {
    if let Some(layers) = &a.layers {
        let spec = match a.k {
            Some(k) => EnsembleSpec::layered_sparse(layers.clone(), k)?,
            None => EnsembleSpec::layered(layers.clone())?,
        };
        let method = a.method.unwrap_or(CountMethod::Recurrence);
        let c = match method {
            CountMethod::Brute => BigCount::from(Ensemble::enumerate(&spec)?.len()),
            _ => count_layered(&spec)?,
        };
        return Ok(json!({
            "ensemble": spec,
            "method": if method == CountMethod::Brute { "brute" } else { "closed_form" },
            "count": big(&c),
            "ln_count": ln_big(&c),
        }));
    }
    let m = a.m.ok_or_else(|| Error::Usage("count needs --m or --layers".into()))?;
    let method = a.method.unwrap_or(CountMethod::Recurrence);
    let base = json!({ "m": m, "k": a.k });
    let mut v = match method {
        CountMethod::Recurrence => {
            if a.k.is_some() {
                return Err(Error::Usage("no recurrence for a capped in-degree; use --method brute or bounds".into()).into());
            }
            let c = count_essential_recurrence(m);
            json!({ "method": "recurrence", "count": big(&c), "ln_count": ln_big(&c) })
        }
        CountMethod::Brute => {
            let c = count_essential_brute(m, a.k)?;
            json!({ "method": "brute", "count": big(&c), "ln_count": ln_big(&c) })
        }
        CountMethod::Bounds => {
            let (lo, hi) = match a.k {
                Some(k) => count_bounds_sparse(m, k)?,
                None => count_bounds_restricted(m)?,
            };
            json!({
                "method": "bounds",
                "lower": big(&lo),
                "upper": big(&hi),
                "ln_lower": ln_big(&lo),
                "ln_upper": ln_big(&hi),
            })
        }
    };
    let obj = v.as_object_mut().expect("object literal");
    for (k, x) in base.as_object().expect("object literal") {
        obj.insert(k.clone(), x.clone());
    }
    Ok(v)
}

fn bound(a: &BoundArgs) -> CliResult<Value> {
    let spec = a.ensemble.spec()?;
    let family = a.hyper.family(&a.family, None)?;
    let r = bound_report(&spec, &family, a.delta_rule.into())?;
    let floor = r.floor();
    let mut v = serde_json::to_value(&r)?;
    v["floor"] = json!(floor);
    Ok(v)
}

fn table(a: &Table1Args) -> CliResult<Value> {
    let fams = default_table_families()
        .iter()
        .map(|f| a.hyper.family(f.name(), Some(f)))
        .collect::<bnlimits::Result<Vec<_>>>()?;
    let rows = table1(a.m, a.k, &fams, a.delta_rule.into())?;
    // One object per cell: four families × {dense, sparse}.
    let cells: Vec<Value> = rows
        .iter()
        .flat_map(|r| {
            [("dense", &r.dense), ("sparse", &r.sparse)].map(|(variant, b)| {
                json!({
                    "family": r.family.name(),
                    "variant": variant,
                    "m": a.m,
                    "k": if variant == "sparse" { Some(a.k) } else { None },
                    "delta_max": b.delta_max,
                    "remainder": b.remainder,
                    "threshold_L": b.threshold,
                    "vacuous": b.vacuous,
                    "hyperparameters": r.family,
                })
            })
        })
        .collect();
    Ok(Value::Array(cells))
}

fn sample(a: &SampleArgs) -> CliResult<Value> {
    let spec = a.ensemble.spec()?;
    let mut rng = derived_rng(a.seed, &[]);
    let mut out = Vec::with_capacity(a.count);
    for _ in 0..a.count {
        let g = sample_with(&spec, &mut rng)?;
        let m = g.m();
        let adjacency: Vec<Vec<u8>> = (0..m)
            .map(|i| (0..m).map(|j| g.has_edge(i, j) as u8).collect())
            .collect();
        out.push(json!({
            "m": m,
            "parents": (0..m).map(|i| g.parent_list(i)).collect::<Vec<_>>(),
            "adjacency": adjacency,
        }));
    }
    Ok(Value::Array(out))
}

fn mi(a: &MiArgs) -> CliResult<Value> {
    let spec = a.ensemble.spec()?;
    let family = a.hyper.family(&a.family, None)?;
    let pm = ParamMap::new(family, a.param_seed)?.with_policy(a.policy.into());
    let method = match a.mc {
        Some(trials) => MiMethod::MonteCarlo { trials, seed: a.seed },
        None => MiMethod::Exact,
    };
    let mut v = serde_json::to_value(mi_report(&spec, &pm, a.n, method, a.delta_rule.into())?)?;
    // Renamed so that `--bits` converts it alongside the estimate.
    if let Some(se) = v["std_error"].as_f64() {
        v["estimate_std_error"] = json!(se);
        v.as_object_mut().expect("report is an object").remove("std_error");
    }
    Ok(v)
}

fn run(cli: &Cli) -> CliResult<Outcome> {
    Ok(match &cli.command {
        Command::Count(a) => Outcome::ok(count(a)?),
        Command::Bound(a) => Outcome::ok(bound(a)?),
        Command::Table1(a) => Outcome::ok(table(a)?),
        Command::Sample(a) => Outcome::ok(sample(a)?),
        Command::Mi(a) => Outcome::ok(mi(a)?),
        Command::VerifyKl(a) => {
            let family = a.hyper.family(&a.family, None)?;
            let r = verify_kl(&family, a.trials, a.seed, a.tolerance)?;
            let mut o = Outcome::ok(serde_json::to_value(&r)?);
            o.value["passed"] = json!(r.passed());
            o.failed = !r.passed();
            o
        }
        Command::VerifyFano(a) => {
            let r = run_fano_trials(a.trials, a.seed, a.tolerance)?;
            let mut o = Outcome::ok(serde_json::to_value(&r)?);
            o.value["passed"] = json!(r.passed());
            o.failed = !r.passed();
            o
        }
        Command::Simulate(a) => {
            let cfg = ExperimentConfig::load(&a.config)?;
            let r = run_error_curve(&cfg, cfg.decoder)?;
            match &cli.out {
                // Persisted results stay in nats so that they load back unchanged.
                Some(path) => {
                    persist(&r, path)?;
                    Outcome {
                        value: Value::Null,
                        csv: None,
                        failed: false,
                        silent: true,
                    }
                }
                None => Outcome {
                    csv: Some(experiments::to_csv(&r)),
                    ..Outcome::ok(serde_json::to_value(&r)?)
                },
            }
        }
        Command::VerifyThreshold(a) => {
            let cfg = ExperimentConfig::load(&a.config)?;
            let r = verify_threshold(&cfg, cfg.decoder)?;
            let mut o = Outcome::ok(serde_json::to_value(&r)?);
            o.failed = r.verdict == Verdict::Fail;
            if let Some(result) = &r.result {
                o.csv = Some(experiments::to_csv(result));
            }
            o
        }
    })
}

fn write_out(cli: &Cli, text: &str) -> CliResult<()> {
    match &cli.out {
        Some(path) => std::fs::write(path, text).map_err(|source| {
            CliError::Lib(Error::Io {
                path: path.clone(),
                source,
            })
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let result = run(&cli).and_then(|mut o| {
        if !o.silent {
            output::convert_units(&mut o.value, LOG_KEYS, cli.bits);
            let text = match (&o.csv, cli.format) {
                (Some(csv), Format::Csv) => csv.clone(),
                (_, f) => output::render(&o.value, f),
            };
            write_out(&cli, &text)?;
        }
        Ok(o.failed)
    });
    match result {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(4),
        Err(e) => {
            match &e {
                CliError::Lib(e) => eprintln!("error: {e}"),
                CliError::Json(e) => eprintln!("error: {e}"),
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
