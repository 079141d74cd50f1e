//! Simulation harness: configuration, trials, Monte Carlo experiments, the
//! Wald diagnostic and result files.
//!
//! Output files written by [`write_outputs`]:
//!
//! * `raw.csv`: one row per `(theta_index, policy, horizon, replication)`
//!   with `seed, pseudo_regret, pseudo_regret_gaps, realized_regret, reward,
//!   overshoot, final_group` and one `T_<group>.<index>` column per job;
//! * `aggregate.csv`: one row per `(theta_index, policy, horizon)` with means,
//!   standard deviations and 95% half-widths, `regret_per_log_n`, `z`,
//!   `ratio_to_z`, `overshoot_rate` and `mean_T_<job>` columns;
//! * `summary.csv`: regret against `z(θ, ℓ) log N` across horizons;
//! * `report.json`: the aggregate rows, summaries, anomalies and runtime.
//!
//! Runtime is recorded only in `report.json`, so the CSV files are a pure
//! function of the configuration and seed.

mod config;
mod monte_carlo;
mod trial;
mod wald;

pub use config::{BoxSpec, Experiment, ExperimentConfig, PointRef, SpaceSpec, SweepSpec, WaldSpec};
pub use monte_carlo::{
    make_policy, mean_sd_ci, monte_carlo, simulate_to_dir, summarize_bound_vs_empirical, trial_seed, write_outputs,
    write_traces, AggregateRow, BoundSummary, RegretReport, SummaryRow,
};
pub use trial::{run_trial, ActionRun, TrialLog};
pub use wald::{wald_diagnostic, WaldReport};
