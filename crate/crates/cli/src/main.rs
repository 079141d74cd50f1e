//! `pbandit`: command-line front end for the precedence-constrained bandit
//! library.
//!
//! Exit status is 0 on success, 1 for usage and configuration errors and 2
//! for runtime faults. Errors are printed to stderr with the prefix `error:`.

use std::fs;
use std::io::Write;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use precedence_bandit::allocation::{solve_all, solve_allocation, AllocationOptions};
use precedence_bandit::harness::{
    simulate_to_dir, summarize_bound_vs_empirical, wald_diagnostic, Experiment, ExperimentConfig, PointRef,
    SweepSpec,
};
use precedence_bandit::information::{bad_set, partition};
use precedence_bandit::strategy::PolicyKind;
use precedence_bandit::HarnessError;
use serde_json::json;

#[derive(Debug, Parser)]
#[command(name = "pbandit", version, about = "Precedence-constrained multi-armed bandits with Markovian rewards")]
struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the master seed of the configuration.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Writes one JSON-lines trace per trial under `<out>/trace`.
    #[arg(long, global = true)]
    trace: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Partition, bad sets and (with --out) KL matrices of the parameter space.
    Info,
    /// Solves the lower-bound program for every parameter or a named one.
    Bound {
        /// Space index of the parameter.
        #[arg(long)]
        theta: Option<usize>,
    },
    /// Monte Carlo regret experiment over the configured horizons.
    Simulate(SimArgs),
    /// Wald's-equation diagnostic for the configured pair of parameters.
    Wald {
        /// Stopping thresholds (overrides the configuration).
        #[arg(long, value_delimiter = ',')]
        threshold: Vec<f64>,
        #[arg(long)]
        replications: Option<usize>,
    },
    /// Monte Carlo regret experiment over a geometric horizon grid.
    Sweep {
        #[arg(long)]
        from: Option<u64>,
        #[arg(long)]
        to: Option<u64>,
        #[arg(long)]
        points: Option<usize>,
        #[command(flatten)]
        sim: SimArgs,
    },
}

#[derive(Debug, Args)]
struct SimArgs {
    /// Horizons (overrides the configuration).
    #[arg(long, value_delimiter = ',')]
    horizons: Vec<u64>,
    #[arg(long)]
    replications: Option<usize>,
    /// Policies (overrides the configuration).
    #[arg(long, value_delimiter = ',', value_parser = parse_policy)]
    policies: Vec<PolicyKind>,
}

fn parse_policy(s: &str) -> Result<PolicyKind, String> {
    serde_json::from_value(json!(s)).map_err(|_| format!("unknown policy `{s}`"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    panic::set_hook(Box::new(|info| eprintln!("error: runtime fault: {info}")));
    match panic::catch_unwind(AssertUnwindSafe(|| run(&cli))) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 1 } else { 2 })
        }
        Err(_) => ExitCode::from(2),
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig, HarnessError> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| HarnessError::Config("--config <PATH> is required".into()))?;
    let mut cfg = ExperimentConfig::from_path(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: &ExperimentConfig) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("pbandit-out"))
}

fn print_json(v: &serde_json::Value) -> Result<(), HarnessError> {
    let s = serde_json::to_string_pretty(v).map_err(|e| HarnessError::Serialization(e.to_string()))?;
    match writeln!(std::io::stdout().lock(), "{s}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(HarnessError::io("<stdout>", e)),
        _ => Ok(()),
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

fn to_value<T: serde::Serialize>(v: &T) -> Result<serde_json::Value, HarnessError> {
    serde_json::to_value(v).map_err(|e| HarnessError::Serialization(e.to_string()))
}

fn run(cli: &Cli) -> Result<(), HarnessError> {
    let mut cfg = load(cli)?;
    match &cli.command {
        Command::Info => info(cli, &cfg.build()?),
        Command::Bound { theta } => bound(&cfg.build()?, *theta),
        Command::Simulate(sim) => {
            sim.apply(&mut cfg);
            let horizons = cfg.horizons.clone();
            simulate(cli, &cfg, &horizons)
        }
        Command::Sweep { from, to, points, sim } => {
            sim.apply(&mut cfg);
            let base = cfg.sweep.clone();
            let spec = SweepSpec {
                from: from.or(base.as_ref().map(|s| s.from)).ok_or_else(|| missing("sweep.from"))?,
                to: to.or(base.as_ref().map(|s| s.to)).ok_or_else(|| missing("sweep.to"))?,
                points: points.or(base.as_ref().map(|s| s.points)).ok_or_else(|| missing("sweep.points"))?,
            };
            let horizons = spec.horizons()?;
            simulate(cli, &cfg, &horizons)
        }
        Command::Wald { threshold, replications } => wald(cli, &cfg, threshold, *replications),
    }
}

fn missing(field: &str) -> HarnessError {
    HarnessError::Config(format!("`{field}` is required (config or flag)"))
}

impl SimArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if !self.horizons.is_empty() {
            cfg.horizons = self.horizons.clone();
        }
        if let Some(r) = self.replications {
            cfg.replications = r;
        }
        if !self.policies.is_empty() {
            cfg.policies = self.policies.clone();
        }
    }
}

fn info(cli: &Cli, exp: &Experiment) -> Result<(), HarnessError> {
    let inst = &exp.instance;
    let tol = inst.tolerances().kl_zero;
    let bad_sets: Vec<_> = (0..inst.len()).map(|p| bad_set(inst, p, tol)).collect();
    let points: Vec<_> = (0..inst.len()).map(|p| inst.space().point(p).0.clone()).collect();
    print_json(&json!({
        "points": points,
        "partition": to_value(&partition(inst))?,
        "bad_sets": to_value(&bad_sets)?,
    }))?;
    if let Some(dir) = &cli.out {
        for job in inst.groups().jobs() {
            let m = inst.kl_matrix(job, exp.config.execution);
            let mut text = String::from("theta");
            for q in 0..inst.len() {
                text.push_str(&format!(",{q}"));
            }
            text.push('\n');
            for (p, row) in m.iter().enumerate() {
                text.push_str(&p.to_string());
                for v in row {
                    text.push_str(&format!(",{v}"));
                }
                text.push('\n');
            }
            write_file(&dir.join(format!("kl_{}_{}.csv", job.group, job.index)), &text)?;
        }
    }
    Ok(())
}

fn bound(exp: &Experiment, theta: Option<usize>) -> Result<(), HarnessError> {
    let inst = &exp.instance;
    let opts = AllocationOptions {
        row_indexing: exp.config.strategy.row_indexing,
        bad_set_override: None,
    };
    match theta {
        Some(t) => {
            let t = PointRef::Index(t).resolve(inst.space())?;
            print_json(&to_value(&solve_allocation(inst, t, &opts)?)?)
        }
        None => {
            let all = solve_all(inst, &opts, exp.config.execution)
                .into_iter()
                .enumerate()
                .map(|(t, r)| match r {
                    Ok(s) => to_value(&s),
                    Err(e) => Ok(json!({ "theta": t, "error": e.to_string() })),
                })
                .collect::<Result<Vec<_>, _>>()?;
            print_json(&serde_json::Value::Array(all))
        }
    }
}

fn simulate(cli: &Cli, cfg: &ExperimentConfig, horizons: &[u64]) -> Result<(), HarnessError> {
    let exp = cfg.build()?;
    let dir = out_dir(cli, cfg);
    let report = simulate_to_dir(&exp, horizons, &dir, cli.trace)?;
    print_json(&json!({
        "out": dir,
        "summary": to_value(&summarize_bound_vs_empirical(&report))?,
        "anomalies": report.anomalies,
        "runtime_seconds": report.runtime_seconds,
    }))
}

fn wald(cli: &Cli, cfg: &ExperimentConfig, thresholds: &[f64], replications: Option<usize>) -> Result<(), HarnessError> {
    let exp = cfg.build()?;
    let spec = cfg.wald.as_ref().ok_or_else(|| missing("wald"))?;
    let inst = &exp.instance;
    let theta0 = spec.theta0.resolve(inst.space())?;
    let theta_q = spec.theta_q.resolve(inst.space())?;
    let thresholds = if thresholds.is_empty() { &spec.thresholds } else { thresholds };
    if thresholds.is_empty() {
        return Err(missing("wald.thresholds"));
    }
    let reports = thresholds
        .iter()
        .map(|&c| {
            wald_diagnostic(
                inst,
                spec.job,
                theta0,
                theta_q,
                c,
                replications.unwrap_or(spec.replications),
                cfg.seed,
                spec.max_steps,
                cfg.execution,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let value = to_value(&reports)?;
    if let Some(dir) = cli.out.as_ref().or(cfg.output_dir.as_ref()) {
        let text = serde_json::to_string_pretty(&value).map_err(|e| HarnessError::Serialization(e.to_string()))?;
        write_file(&dir.join("wald.json"), &text)?;
    }
    print_json(&value)
}
