//! The staged strategy as an explicit state machine.
//!
//! Everything that depends only on `(instance, N, config)` lives in a shared
//! [`PhiStarPlan`]: the adjusted estimate, its set `H` and the solved
//! allocation for every possible estimate, the optimal regions `Θ_kj` and the
//! per-group test statistics. A [`PhiStar`] value is the per-trial state.

use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::statistic::{rejection_sweep, LogLikelihoods, RejectionState, TestStatistic};
use super::{EstimateRelation, Event, Policy, PolicyKind, Schedules, StrategyConfig};
use crate::allocation::{solve_allocation, AllocationOptions, AllocationSolution};
use crate::error::ModelError;
use crate::information::{union_bad_set, Instance};
use crate::par::{self, Execution};
use crate::populations::{JobId, SpaceOrigin, State};

/// Result of projecting an estimate into the earliest reachable group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustedEstimate {
    pub theta_hat: usize,
    pub theta_a: usize,
    pub group: usize,
    /// Points of the ball in that group with the largest optimal-job set.
    pub h: Vec<usize>,
}

/// Adjusted estimate over the open ball of radius `delta / 2` around `theta_hat`.
pub fn adjusted_mle(inst: &Instance, theta_hat: usize, delta: f64) -> AdjustedEstimate {
    let centre = inst.space().point(theta_hat);
    let dist: Vec<f64> = inst.space().points().iter().map(|p| p.distance(centre)).collect();
    let ball: Vec<usize> = (0..inst.len())
        .filter(|&p| p == theta_hat || dist[p] < delta / 2.0)
        .collect();
    let group = ball.iter().map(|&p| inst.class(p).group).min().unwrap();
    let in_group: Vec<usize> = ball.into_iter().filter(|&p| inst.class(p).group == group).collect();
    let max_j = in_group.iter().map(|&p| inst.class(p).optimal_jobs.len()).max().unwrap();
    let h: Vec<usize> = in_group
        .into_iter()
        .filter(|&p| inst.class(p).optimal_jobs.len() == max_j)
        .collect();
    let theta_a = *h
        .iter()
        .min_by(|&&a, &&b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)))
        .unwrap();
    AdjustedEstimate {
        theta_hat,
        theta_a,
        group,
        h,
    }
}

/// Shared, read-only precomputation for one `(instance, N, config)`.
#[derive(Debug)]
pub struct PhiStarPlan {
    inst: Arc<Instance>,
    schedules: Schedules,
    config: StrategyConfig,
    estimates: Vec<AdjustedEstimate>,
    allocations: Vec<Result<AllocationSolution, String>>,
    /// `regions[k-1][j-1]` is `Θ_kj`.
    regions: Vec<Vec<Vec<usize>>>,
    stats: Vec<TestStatistic>,
}

impl PhiStarPlan {
    pub fn new(inst: Arc<Instance>, horizon: u64, config: &StrategyConfig, exec: Execution) -> Result<Self, ModelError> {
        config.prior.validate(inst.len())?;
        let mut schedules = Schedules::with_overrides(horizon, config);
        if config.delta.is_none() {
            if let Some(d) = inst.space().neighborhood_radius() {
                schedules.delta = d;
            } else if matches!(inst.space().origin(), SpaceOrigin::NativeFinite) {
                schedules.delta = schedules.delta.min(min_distance(&inst));
            }
        }
        let estimates: Vec<AdjustedEstimate> = (0..inst.len())
            .map(|p| adjusted_mle(&inst, p, schedules.delta))
            .collect();
        let opts_base = AllocationOptions {
            row_indexing: config.row_indexing,
            bad_set_override: None,
        };
        let allocations = par::map_indexed(exec, inst.len(), |p| {
            let est = &estimates[p];
            let tol = inst.tolerances().kl_zero;
            let j_a = &inst.class(est.theta_a).optimal_jobs;
            let union = union_bad_set(&inst, &est.h, tol).map_err(|e| e.to_string())?;
            let bad: Vec<usize> = union
                .into_iter()
                .filter(|&q| !inst.class(q).optimal_jobs.iter().any(|j| j_a.contains(j)))
                .collect();
            let opts = AllocationOptions {
                bad_set_override: Some(bad),
                ..opts_base.clone()
            };
            solve_allocation(&inst, est.theta_a, &opts).map_err(|e| e.to_string())
        });
        let groups = inst.groups();
        let regions = (1..=groups.num_groups())
            .map(|k| groups.group_jobs(k).map(|j| inst.job_members(j)).collect())
            .collect();
        let stats = (1..=groups.num_groups())
            .map(|k| TestStatistic::new(&inst, k, &config.prior))
            .collect();
        Ok(PhiStarPlan {
            inst,
            schedules,
            config: config.clone(),
            estimates,
            allocations,
            regions,
            stats,
        })
    }

    pub fn instance(&self) -> &Arc<Instance> {
        &self.inst
    }

    pub fn schedules(&self) -> &Schedules {
        &self.schedules
    }

    pub fn estimate(&self, theta_hat: usize) -> &AdjustedEstimate {
        &self.estimates[theta_hat]
    }

    /// The allocation solved at the adjusted estimate of `theta_hat`, or the
    /// solver's error message.
    pub fn allocation(&self, theta_hat: usize) -> Result<&AllocationSolution, &str> {
        self.allocations[theta_hat].as_ref().map_err(String::as_str)
    }

    /// Experimentation quotas `⌊ẑ_kj ln N⌋` for group `k` given estimate `theta_hat`.
    pub fn quotas(&self, theta_hat: usize, k: usize) -> (EstimateRelation, Vec<(JobId, u64)>) {
        let est = &self.estimates[theta_hat];
        let relation = match est.group.cmp(&k) {
            std::cmp::Ordering::Greater => EstimateRelation::Later,
            std::cmp::Ordering::Equal => EstimateRelation::Current,
            std::cmp::Ordering::Less => EstimateRelation::Earlier,
        };
        let Ok(sol) = self.allocation(theta_hat) else {
            return (relation, Vec::new());
        };
        let ln = self.schedules.log_horizon();
        let j_a = &self.inst.class(est.theta_a).optimal_jobs;
        let quotas = match relation {
            EstimateRelation::Earlier => Vec::new(),
            _ => self
                .inst
                .groups()
                .group_jobs(k)
                .filter(|j| relation == EstimateRelation::Later || !j_a.contains(&j.index))
                .map(|j| (j, (sol.z_of(j) * ln).floor() as u64))
                .filter(|&(_, q)| q > 0)
                .collect(),
        };
        (relation, quotas)
    }
}

fn min_distance(inst: &Instance) -> f64 {
    let pts = inst.space().points();
    let mut d = f64::INFINITY;
    for a in 0..pts.len() {
        for b in a + 1..pts.len() {
            d = d.min(pts[a].distance(&pts[b]));
        }
    }
    d
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Estimation,
    Experimentation,
    Testing,
    Terminal,
}

/// Per-trial state of the staged strategy.
#[derive(Debug)]
pub struct PhiStar {
    plan: Arc<PhiStarPlan>,
    ll: LogLikelihoods,
    last: Vec<Option<State>>,
    counts: Vec<u64>,
    t: u64,
    stage: Stage,
    group: usize,
    theta_hat: usize,
    relation: EstimateRelation,
    queue: VecDeque<JobId>,
    rejection: Option<RejectionState>,
    final_job: Option<JobId>,
    events: Vec<Event>,
}

impl PhiStar {
    pub fn new(plan: Arc<PhiStarPlan>) -> Self {
        let inst = plan.instance().clone();
        let n0 = plan.schedules().n0;
        let queue = inst
            .groups()
            .group_jobs(1)
            .flat_map(|j| std::iter::repeat_n(j, n0 as usize))
            .collect();
        PhiStar {
            ll: LogLikelihoods::new(inst.len()),
            last: vec![None; inst.groups().total_jobs()],
            counts: vec![0; inst.groups().total_jobs()],
            t: 0,
            stage: Stage::Estimation,
            group: 1,
            theta_hat: 0,
            relation: EstimateRelation::Current,
            queue,
            rejection: None,
            final_job: None,
            events: Vec::new(),
            plan,
        }
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn group(&self) -> usize {
        self.group
    }

    pub fn theta_hat(&self) -> Option<usize> {
        (self.stage != Stage::Estimation).then_some(self.theta_hat)
    }

    pub fn rejection_state(&self) -> Option<&RejectionState> {
        self.rejection.as_ref()
    }

    pub fn sample_counts(&self) -> &[u64] {
        &self.counts
    }

    fn estimate(&mut self) {
        self.theta_hat = self.ll.argmax();
        let est = self.plan.estimate(self.theta_hat).clone();
        self.events.push(Event::Estimated {
            t: self.t,
            theta_hat: self.theta_hat,
            theta_hat_a: est.theta_a,
            estimate_group: est.group,
            h: est.h,
        });
        if let Err(msg) = self.plan.allocation(self.theta_hat) {
            self.events.push(Event::Anomaly {
                t: self.t,
                message: format!("allocation at the adjusted estimate failed ({msg}); experimentation skipped"),
            });
        }
    }

    fn enter_group(&mut self, k: usize) {
        self.group = k;
        self.stage = Stage::Experimentation;
        self.rejection = None;
        let (relation, quotas) = self.plan.quotas(self.theta_hat, k);
        self.relation = relation;
        self.queue.clear();
        for &(j, q) in &quotas {
            self.queue.extend(std::iter::repeat_n(j, q as usize));
        }
        self.events.push(Event::Experimentation {
            t: self.t,
            group: k,
            relation,
            quotas,
        });
    }

    fn start_testing(&mut self) {
        self.stage = Stage::Testing;
        self.rejection = Some(RejectionState::new(self.plan.instance(), self.group));
        self.events.push(Event::TestingStarted {
            t: self.t,
            group: self.group,
        });
        self.sweep();
    }

    fn sweep(&mut self) {
        let k = self.group;
        let plan = &self.plan;
        let state = self.rejection.as_mut().expect("sweep outside testing");
        let out = rejection_sweep(
            &plan.stats[k - 1],
            &self.ll,
            state,
            &plan.regions[k - 1],
            plan.schedules.log_horizon(),
            plan.config.rejection,
        );
        for (lambda, log_u) in out.lambdas {
            self.events.push(Event::ParameterRejected {
                t: self.t,
                group: k,
                lambda,
                log_u,
            });
        }
        for (job, log_u) in out.jobs {
            self.events.push(Event::JobRejected {
                t: self.t,
                job,
                log_u,
                vacuous: plan.regions[k - 1][job.index - 1].is_empty(),
            });
        }
        if state.all_rejected() {
            self.advance();
        }
    }

    fn advance(&mut self) {
        self.queue.clear();
        let last = self.plan.instance().groups().num_groups();
        if self.group < last {
            self.events.push(Event::GroupAdvanced {
                t: self.t,
                from: self.group,
                to: self.group + 1,
            });
            if self.plan.config.reestimate {
                self.estimate();
            }
            self.enter_group(self.group + 1);
        } else {
            let inst = self.plan.instance();
            let theta_a = self.plan.estimate(self.theta_hat).theta_a;
            let mut best = JobId::new(last, 1);
            for j in inst.groups().group_jobs(last) {
                if inst.mean(theta_a, j) > inst.mean(theta_a, best) {
                    best = j;
                }
            }
            self.final_job = Some(best);
            self.stage = Stage::Terminal;
            self.rejection = None;
            self.events.push(Event::FinalPlay { t: self.t, job: best });
        }
    }

    fn fill_cycle(&mut self) {
        let inst = self.plan.instance().clone();
        let state = self.rejection.as_ref().expect("cycle outside testing");
        let theta_a = self.plan.estimate(self.theta_hat).theta_a;
        let n1 = self.plan.schedules().n1 as usize;
        for j in inst.groups().group_jobs(self.group) {
            if state.is_rejected(j) {
                continue;
            }
            let reps = if self.relation == EstimateRelation::Current && inst.class(theta_a).is_optimal(j) {
                n1
            } else {
                1
            };
            self.queue.extend(std::iter::repeat_n(j, reps));
        }
    }
}

impl Policy for PhiStar {
    fn kind(&self) -> PolicyKind {
        PolicyKind::PhiStar
    }

    fn next_action(&mut self) -> JobId {
        loop {
            if let Some(job) = self.queue.pop_front() {
                if self.rejection.as_ref().is_some_and(|r| r.is_rejected(job)) {
                    continue;
                }
                return job;
            }
            match self.stage {
                Stage::Estimation => {
                    self.estimate();
                    self.enter_group(1);
                }
                Stage::Experimentation => self.start_testing(),
                Stage::Testing => self.fill_cycle(),
                Stage::Terminal => return self.final_job.expect("terminal stage without a final job"),
            }
        }
    }

    fn observe(&mut self, job: JobId, y: State) {
        let inst = self.plan.instance();
        let f = inst.groups().flat_index(job);
        self.ll.update(inst, job, self.last[f], y);
        self.last[f] = Some(y);
        self.counts[f] += 1;
        self.t += 1;
        if self.stage == Stage::Testing {
            self.sweep();
        }
    }

    fn take_events(&mut self) -> Vec<Event> {
        std::mem::take(&mut self.events)
    }
}
