//! Sampling policies under the precedence constraint.
//!
//! [`PhiStar`] is the staged strategy: estimate θ from the first group,
//! force `⌊ẑ_kj log N⌋` experimental samples, then test each group with the
//! mixture likelihood-ratio statistic before moving on. [`baselines`] holds
//! the comparison policies.
//!
//! A policy sees only its own actions and the observations they produced;
//! the harness owns the chains.

pub mod baselines;
mod phi_star;
mod statistic;

pub use baselines::{GreedyMle, Oracle, RoundRobin};
pub use phi_star::{adjusted_mle, AdjustedEstimate, PhiStar, PhiStarPlan, Stage};
pub use statistic::{
    log_likelihoods, log_sum_exp, mle, rejection_sweep, LogLikelihoods, Prior, RejectionMode, RejectionState,
    SweepOutcome, TestStatistic,
};

use serde::{Deserialize, Serialize};

use crate::allocation::RowIndexing;
use crate::populations::{JobId, State};

/// Sample-size schedules for horizon `N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedules {
    pub horizon: u64,
    /// Estimation samples per group-1 job.
    pub n0: u64,
    /// Testing-cycle weight of the estimated optimal jobs.
    pub n1: u64,
    /// Diameter of the adjusted-estimate ball.
    pub delta: f64,
}

impl Schedules {
    /// `n0 = ⌈(ln N)^{2/3}⌉`, `n1 = max(2, ⌈(ln N)^{1/3}⌉)`, `δ = n0^{-1/4}`.
    pub fn default_for(horizon: u64) -> Self {
        let ln = (horizon.max(1) as f64).ln();
        let n0 = (ln.powf(2.0 / 3.0).ceil() as u64).max(1);
        let n1 = (ln.powf(1.0 / 3.0).ceil() as u64).max(2);
        Schedules {
            horizon,
            n0,
            n1,
            delta: (n0 as f64).powf(-0.25),
        }
    }

    pub fn with_overrides(horizon: u64, cfg: &StrategyConfig) -> Self {
        let mut s = Schedules::default_for(horizon);
        if let Some(n0) = cfg.n0 {
            s.n0 = n0;
            s.delta = (n0 as f64).powf(-0.25);
        }
        if let Some(n1) = cfg.n1 {
            s.n1 = n1;
        }
        if let Some(d) = cfg.delta {
            s.delta = d;
        }
        s
    }

    pub fn log_horizon(&self) -> f64 {
        (self.horizon.max(1) as f64).ln()
    }
}

/// Tunable parts of the staged strategy.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategyConfig {
    pub n0: Option<u64>,
    pub n1: Option<u64>,
    /// Fixed ball diameter for the adjusted estimate.
    pub delta: Option<f64>,
    pub rejection: RejectionMode,
    /// Re-estimate θ from all data whenever the strategy advances a group.
    pub reestimate: bool,
    pub row_indexing: RowIndexing,
    pub prior: Prior,
}

/// Which policy to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    PhiStar,
    Oracle,
    RoundRobin,
    GreedyMle,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::PhiStar => "phi-star",
            PolicyKind::Oracle => "oracle",
            PolicyKind::RoundRobin => "round-robin",
            PolicyKind::GreedyMle => "greedy-mle",
        }
    }

    /// Stable numeric id used in seed derivation.
    pub fn id(self) -> u64 {
        match self {
            PolicyKind::PhiStar => 0,
            PolicyKind::Oracle => 1,
            PolicyKind::RoundRobin => 2,
            PolicyKind::GreedyMle => 3,
        }
    }
}

/// Which branch of the experimentation step applies in the current group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateRelation {
    /// The estimate's group lies beyond the current group.
    Later,
    Current,
    Earlier,
}

/// Structured run-log entry; `t` is the number of observations taken so far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum Event {
    Estimated {
        t: u64,
        theta_hat: usize,
        theta_hat_a: usize,
        estimate_group: usize,
        h: Vec<usize>,
    },
    Experimentation {
        t: u64,
        group: usize,
        relation: EstimateRelation,
        quotas: Vec<(JobId, u64)>,
    },
    TestingStarted {
        t: u64,
        group: usize,
    },
    ParameterRejected {
        t: u64,
        group: usize,
        lambda: usize,
        log_u: f64,
    },
    JobRejected {
        t: u64,
        job: JobId,
        log_u: Option<f64>,
        /// The job's optimal region is empty in the space.
        vacuous: bool,
    },
    GroupAdvanced {
        t: u64,
        from: usize,
        to: usize,
    },
    FinalPlay {
        t: u64,
        job: JobId,
    },
    Greedy {
        t: u64,
        theta_hat: usize,
        job: JobId,
    },
    Anomaly {
        t: u64,
        message: String,
    },
}

/// A sequential sampling rule.
pub trait Policy: Send {
    fn kind(&self) -> PolicyKind;

    /// The next job to process.
    fn next_action(&mut self) -> JobId;

    /// Reports the observation produced by the last action.
    fn observe(&mut self, job: JobId, y: State);

    /// Drains the accumulated run log.
    fn take_events(&mut self) -> Vec<Event> {
        Vec::new()
    }
}
