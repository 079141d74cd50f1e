//! Replicated experiments, aggregation and persistence.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::Experiment;
use super::trial::{run_trial, TrialLog};
use crate::allocation::{solve_allocation, AllocationOptions};
use crate::error::HarnessError;
use crate::par;
use crate::rng::derive_seed;
use crate::strategy::{GreedyMle, Oracle, PhiStar, PhiStarPlan, Policy, PolicyKind, RoundRobin, Schedules};

const Z95: f64 = 1.959_963_984_540_054;

/// Aggregate over the replications of one `(θ, policy, N)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub theta_index: usize,
    pub policy: PolicyKind,
    pub horizon: u64,
    pub replications: usize,
    pub mean_regret: f64,
    pub sd_regret: f64,
    pub ci95_regret: f64,
    pub regret_per_log_n: f64,
    /// `z(θ, ℓ)`, absent when the program could not be solved.
    pub z: Option<f64>,
    pub ratio_to_z: Option<f64>,
    pub mean_realized_regret: f64,
    pub ci95_realized_regret: f64,
    pub mean_reward: f64,
    pub ci95_reward: f64,
    pub overshoot_rate: f64,
    pub overshoot_ci95: f64,
    /// Mean `T_N(ij)` in flattened job order.
    pub mean_counts: Vec<f64>,
}

/// Result of [`monte_carlo`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegretReport {
    pub job_labels: Vec<String>,
    pub rows: Vec<AggregateRow>,
    #[serde(skip)]
    pub trials: Vec<TrialLog>,
    pub anomalies: Vec<String>,
    pub runtime_seconds: f64,
}

impl RegretReport {
    pub fn row(&self, theta_index: usize, policy: PolicyKind, horizon: u64) -> Option<&AggregateRow> {
        self.rows
            .iter()
            .find(|r| r.theta_index == theta_index && r.policy == policy && r.horizon == horizon)
    }
}

/// Mean, sample standard deviation and 95% half-width.
pub fn mean_sd_ci(xs: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n;
    let sd = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd, Z95 * sd / n.sqrt())
}

/// Builds a fresh policy for one trial.
pub fn make_policy(
    kind: PolicyKind,
    exp: &Experiment,
    plan: Option<&Arc<PhiStarPlan>>,
    truth: usize,
    horizon: u64,
) -> Result<Box<dyn Policy>, HarnessError> {
    let inst = &exp.instance;
    Ok(match kind {
        PolicyKind::PhiStar => Box::new(PhiStar::new(
            plan.expect("phi-star needs a plan").clone(),
        )),
        PolicyKind::Oracle => Box::new(Oracle::new(inst, Some(truth))?),
        PolicyKind::RoundRobin => Box::new(RoundRobin::new(inst)),
        PolicyKind::GreedyMle => Box::new(GreedyMle::new(
            inst.clone(),
            Schedules::with_overrides(horizon, &exp.config.strategy).n0,
        )),
    })
}

/// Seed of replication `rep` in cell `(theta, policy, horizon)`.
pub fn trial_seed(master: u64, theta: usize, policy: PolicyKind, horizon: u64, rep: usize) -> u64 {
    derive_seed(master, &[theta as u64, policy.id(), horizon, rep as u64])
}

/// Runs every `(θ, N, policy)` cell with the configured replications.
pub fn monte_carlo(exp: &Experiment, horizons: &[u64], record_actions: bool) -> Result<RegretReport, HarnessError> {
    let cfg = &exp.config;
    cfg.validate_simulation(horizons)?;
    let exec = cfg.execution;
    let inst = &exp.instance;
    let start = Instant::now();
    let mut anomalies = Vec::new();
    let opts = AllocationOptions {
        row_indexing: cfg.strategy.row_indexing,
        bad_set_override: None,
    };
    let mut z_of: HashMap<usize, Option<f64>> = HashMap::new();
    for &t in &exp.truth {
        let z = match solve_allocation(inst, t, &opts) {
            Ok(s) => Some(s.objective),
            Err(e) => {
                anomalies.push(format!("lower bound for parameter #{t}: {e}"));
                None
            }
        };
        z_of.insert(t, z);
    }
    let mut rows = Vec::new();
    let mut trials = Vec::new();
    for &horizon in horizons {
        let plan = if cfg.policies.contains(&PolicyKind::PhiStar) {
            Some(Arc::new(PhiStarPlan::new(inst.clone(), horizon, &cfg.strategy, exec)?))
        } else {
            None
        };
        for &theta in &exp.truth {
            for &kind in &cfg.policies {
                let logs = par::try_map_indexed(exec, cfg.replications, |rep| {
                    let seed = trial_seed(cfg.seed, theta, kind, horizon, rep);
                    let mut policy = make_policy(kind, exp, plan.as_ref(), theta, horizon)?;
                    Ok::<_, HarnessError>(run_trial(inst, policy.as_mut(), theta, horizon, seed, record_actions))
                })?;
                for log in &logs {
                    for e in &log.events {
                        if let crate::strategy::Event::Anomaly { message, .. } = e {
                            anomalies.push(format!(
                                "{} at #{theta}, N={horizon}, seed {}: {message}",
                                kind.name(),
                                log.seed
                            ));
                        }
                    }
                }
                rows.push(aggregate(theta, kind, horizon, &logs, z_of[&theta], inst.groups().total_jobs()));
                trials.extend(logs);
            }
        }
    }
    anomalies.dedup();
    Ok(RegretReport {
        job_labels: inst.groups().jobs().map(|j| j.to_string()).collect(),
        rows,
        trials,
        anomalies,
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}

fn aggregate(theta: usize, policy: PolicyKind, horizon: u64, logs: &[TrialLog], z: Option<f64>, jobs: usize) -> AggregateRow {
    let col = |f: fn(&TrialLog) -> f64| logs.iter().map(f).collect::<Vec<_>>();
    let (mean_regret, sd_regret, ci95_regret) = mean_sd_ci(&col(|l| l.pseudo_regret));
    let (mean_realized_regret, _, ci95_realized_regret) = mean_sd_ci(&col(|l| l.realized_regret));
    let (mean_reward, _, ci95_reward) = mean_sd_ci(&col(|l| l.reward));
    let n = logs.len() as f64;
    let p = logs.iter().filter(|l| l.overshoot).count() as f64 / n;
    let ln = (horizon as f64).ln();
    let regret_per_log_n = if ln > 0.0 { mean_regret / ln } else { 0.0 };
    let mean_counts = (0..jobs)
        .map(|f| logs.iter().map(|l| l.counts[f] as f64).sum::<f64>() / n)
        .collect();
    AggregateRow {
        theta_index: theta,
        policy,
        horizon,
        replications: logs.len(),
        mean_regret,
        sd_regret,
        ci95_regret,
        regret_per_log_n,
        z,
        ratio_to_z: z.filter(|&z| z > 0.0).map(|z| regret_per_log_n / z),
        mean_realized_regret,
        ci95_realized_regret,
        mean_reward,
        ci95_reward,
        overshoot_rate: p,
        overshoot_ci95: Z95 * (p * (1.0 - p) / n).sqrt(),
        mean_counts,
    }
}

/// One horizon of a [`BoundSummary`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub horizon: u64,
    pub mean_regret: f64,
    pub regret_per_log_n: f64,
    pub z: Option<f64>,
    pub ratio: Option<f64>,
}

/// Empirical regret against the lower-bound constant for one `(θ, policy)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSummary {
    pub theta_index: usize,
    pub policy: PolicyKind,
    pub rows: Vec<SummaryRow>,
    /// Least-squares slope of mean regret against `ln N`.
    pub slope_vs_log_n: f64,
    /// Least-squares slope of `ln(mean regret)` against `ln N` (absent when
    /// any mean regret is zero).
    pub elasticity: Option<f64>,
    /// Regret grows polynomially in `N` (elasticity above one half).
    pub super_logarithmic: bool,
}

fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx > 0.0 {
        sxy / sxx
    } else {
        0.0
    }
}

/// Tabulates each `(θ, policy)` across horizons.
pub fn summarize_bound_vs_empirical(report: &RegretReport) -> Vec<BoundSummary> {
    let mut keys: Vec<(usize, PolicyKind)> = Vec::new();
    for r in &report.rows {
        if !keys.contains(&(r.theta_index, r.policy)) {
            keys.push((r.theta_index, r.policy));
        }
    }
    keys.into_iter()
        .map(|(theta_index, policy)| {
            let mut rows: Vec<&AggregateRow> = report
                .rows
                .iter()
                .filter(|r| r.theta_index == theta_index && r.policy == policy)
                .collect();
            rows.sort_by_key(|r| r.horizon);
            let lx: Vec<f64> = rows.iter().map(|r| (r.horizon as f64).ln()).collect();
            let ry: Vec<f64> = rows.iter().map(|r| r.mean_regret).collect();
            let elasticity = (ry.iter().all(|&r| r > 0.0) && rows.len() >= 2)
                .then(|| ls_slope(&lx, &ry.iter().map(|r| r.ln()).collect::<Vec<_>>()));
            BoundSummary {
                theta_index,
                policy,
                slope_vs_log_n: ls_slope(&lx, &ry),
                super_logarithmic: elasticity.is_some_and(|e| e > 0.5),
                elasticity,
                rows: rows
                    .iter()
                    .map(|r| SummaryRow {
                        horizon: r.horizon,
                        mean_regret: r.mean_regret,
                        regret_per_log_n: r.regret_per_log_n,
                        z: r.z,
                        ratio: r.ratio_to_z,
                    })
                    .collect(),
            }
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> HarnessError + '_ {
    move |e| match e.into_kind() {
        csv::ErrorKind::Io(io) => HarnessError::io(path, io),
        other => HarnessError::Serialization(format!("{}: {other:?}", path.display())),
    }
}

/// Writes `raw.csv`, `aggregate.csv`, `summary.csv` and `report.json` into
/// `dir`, plus one JSON-lines trace per trial under `dir/trace` when `trace` is set.
pub fn write_outputs(report: &RegretReport, dir: &Path, trace: bool) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;

    let raw = dir.join("raw.csv");
    let mut w = csv::Writer::from_path(&raw).map_err(csv_err(&raw))?;
    let mut header: Vec<String> = [
        "theta_index",
        "policy",
        "horizon",
        "replication",
        "seed",
        "pseudo_regret",
        "pseudo_regret_gaps",
        "realized_regret",
        "reward",
        "overshoot",
        "final_group",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(report.job_labels.iter().map(|j| format!("T_{j}")));
    w.write_record(&header).map_err(csv_err(&raw))?;
    let mut rep_of: HashMap<(usize, PolicyKind, u64), usize> = HashMap::new();
    for l in &report.trials {
        let rep = rep_of.entry((l.theta, l.policy, l.horizon)).or_insert(0);
        let mut rec = vec![
            l.theta.to_string(),
            l.policy.name().to_string(),
            l.horizon.to_string(),
            rep.to_string(),
            l.seed.to_string(),
            l.pseudo_regret.to_string(),
            l.pseudo_regret_gaps.to_string(),
            l.realized_regret.to_string(),
            l.reward.to_string(),
            u8::from(l.overshoot).to_string(),
            l.final_group.to_string(),
        ];
        rec.extend(l.counts.iter().map(|c| c.to_string()));
        w.write_record(&rec).map_err(csv_err(&raw))?;
        *rep += 1;
    }
    w.flush().map_err(|e| HarnessError::io(&raw, e))?;

    let agg = dir.join("aggregate.csv");
    let mut w = csv::Writer::from_path(&agg).map_err(csv_err(&agg))?;
    let mut header: Vec<String> = [
        "theta_index",
        "policy",
        "horizon",
        "replications",
        "mean_regret",
        "sd_regret",
        "ci95_regret",
        "regret_per_log_n",
        "z",
        "ratio_to_z",
        "mean_realized_regret",
        "ci95_realized_regret",
        "mean_reward",
        "ci95_reward",
        "overshoot_rate",
        "overshoot_ci95",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(report.job_labels.iter().map(|j| format!("mean_T_{j}")));
    w.write_record(&header).map_err(csv_err(&agg))?;
    for r in &report.rows {
        let mut rec = vec![
            r.theta_index.to_string(),
            r.policy.name().to_string(),
            r.horizon.to_string(),
            r.replications.to_string(),
            r.mean_regret.to_string(),
            r.sd_regret.to_string(),
            r.ci95_regret.to_string(),
            r.regret_per_log_n.to_string(),
            opt(r.z),
            opt(r.ratio_to_z),
            r.mean_realized_regret.to_string(),
            r.ci95_realized_regret.to_string(),
            r.mean_reward.to_string(),
            r.ci95_reward.to_string(),
            r.overshoot_rate.to_string(),
            r.overshoot_ci95.to_string(),
        ];
        rec.extend(r.mean_counts.iter().map(|c| c.to_string()));
        w.write_record(&rec).map_err(csv_err(&agg))?;
    }
    w.flush().map_err(|e| HarnessError::io(&agg, e))?;

    let summaries = summarize_bound_vs_empirical(report);
    let sum = dir.join("summary.csv");
    let mut w = csv::Writer::from_path(&sum).map_err(csv_err(&sum))?;
    w.write_record([
        "theta_index",
        "policy",
        "horizon",
        "mean_regret",
        "regret_per_log_n",
        "z",
        "ratio",
        "slope_vs_log_n",
        "super_logarithmic",
    ])
    .map_err(csv_err(&sum))?;
    for s in &summaries {
        for r in &s.rows {
            w.write_record([
                s.theta_index.to_string(),
                s.policy.name().to_string(),
                r.horizon.to_string(),
                r.mean_regret.to_string(),
                r.regret_per_log_n.to_string(),
                opt(r.z),
                opt(r.ratio),
                s.slope_vs_log_n.to_string(),
                u8::from(s.super_logarithmic).to_string(),
            ])
            .map_err(csv_err(&sum))?;
        }
    }
    w.flush().map_err(|e| HarnessError::io(&sum, e))?;

    let json = serde_json::json!({
        "rows": report.rows,
        "summary": summaries,
        "anomalies": report.anomalies,
        "runtime_seconds": report.runtime_seconds,
    });
    let path = dir.join("report.json");
    let text = serde_json::to_string_pretty(&json).map_err(|e| HarnessError::Serialization(e.to_string()))?;
    fs::write(&path, text + "\n").map_err(|e| HarnessError::io(&path, e))?;

    if trace {
        write_traces(report, &dir.join("trace"))?;
    }
    Ok(())
}

/// One JSON-lines file per trial: its events followed by a summary line.
pub fn write_traces(report: &RegretReport, dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut rep_of: HashMap<(usize, PolicyKind, u64), usize> = HashMap::new();
    for l in &report.trials {
        let rep = rep_of.entry((l.theta, l.policy, l.horizon)).or_insert(0);
        let path = dir.join(format!("theta{}_{}_N{}_rep{}.jsonl", l.theta, l.policy.name(), l.horizon, rep));
        *rep += 1;
        let mut out = String::new();
        for e in &l.events {
            out.push_str(&json_line(e)?);
        }
        let mut summary = l.clone();
        summary.events.clear();
        out.push_str(&json_line(&serde_json::json!({ "event": "summary", "trial": summary }))?);
        let mut f = fs::File::create(&path).map_err(|e| HarnessError::io(&path, e))?;
        f.write_all(out.as_bytes()).map_err(|e| HarnessError::io(&path, e))?;
    }
    Ok(())
}

fn json_line<T: Serialize>(v: &T) -> Result<String, HarnessError> {
    serde_json::to_string(v)
        .map(|s| s + "\n")
        .map_err(|e| HarnessError::Serialization(e.to_string()))
}

/// Runs the configured horizons and persists the outputs.
pub fn simulate_to_dir(exp: &Experiment, horizons: &[u64], dir: &Path, trace: bool) -> Result<RegretReport, HarnessError> {
    let report = monte_carlo(exp, horizons, trace)?;
    write_outputs(&report, dir, trace)?;
    Ok(report)
}
