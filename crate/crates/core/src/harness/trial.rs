//! A single simulated run of a policy against a true parameter.

use serde::{Deserialize, Serialize};

use crate::information::Instance;
use crate::populations::{JobId, State};
use crate::rng;
use crate::strategy::{Event, Policy, PolicyKind};

/// A maximal run of identical consecutive actions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionRun {
    pub job: JobId,
    pub count: u64,
}

/// Everything recorded about one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialLog {
    pub seed: u64,
    pub policy: PolicyKind,
    pub theta: usize,
    pub horizon: u64,
    /// Run-length encoded action sequence (empty unless requested).
    pub actions: Vec<ActionRun>,
    /// `T_N(ij)` in flattened job order.
    pub counts: Vec<u64>,
    /// `Σ_t g(X_t)`.
    pub reward: f64,
    /// `N μ*(θ) − Σ μ_ij(θ) T_N(ij)`.
    pub pseudo_regret: f64,
    /// `Σ_{μ_ij < μ*} (μ* − μ_ij) T_N(ij)`.
    pub pseudo_regret_gaps: f64,
    /// `N μ*(θ) − reward`.
    pub realized_regret: f64,
    /// A job beyond the group of the first optimal job was processed.
    pub overshoot: bool,
    /// Largest group processed (0 when `N = 0`).
    pub final_group: usize,
    pub events: Vec<Event>,
}

/// Simulates `horizon` steps of `policy` against `inst`'s point `theta`.
///
/// Each job owns its chain and its own random stream of `seed`; a chain
/// advances only when its job is processed. Panics if the policy moves back
/// to an earlier group or names a job outside the structure.
pub fn run_trial(
    inst: &Instance,
    policy: &mut dyn Policy,
    theta: usize,
    horizon: u64,
    seed: u64,
    record_actions: bool,
) -> TrialLog {
    let groups = inst.groups();
    let jobs = groups.total_jobs();
    let mut rngs: Vec<_> = (0..jobs).map(|f| rng::stream(seed, f as u64)).collect();
    let mut state: Vec<Option<State>> = vec![None; jobs];
    let mut counts = vec![0u64; jobs];
    let mut actions: Vec<ActionRun> = Vec::new();
    let mut reward = 0.0;
    let mut group = 0usize;
    for _ in 0..horizon {
        let job = policy.next_action();
        assert!(groups.contains(job), "policy emitted job {job} outside the group structure");
        assert!(
            job.group >= group,
            "partial-order violation: job {job} after group {group} was entered"
        );
        group = job.group;
        let f = groups.flat_index(job);
        let y = inst.laws(theta)[f].sample_next(state[f], &mut rngs[f]);
        state[f] = Some(y);
        counts[f] += 1;
        reward += y;
        if record_actions {
            match actions.last_mut() {
                Some(run) if run.job == job => run.count += 1,
                _ => actions.push(ActionRun { job, count: 1 }),
            }
        }
        policy.observe(job, y);
    }
    let class = inst.class(theta);
    let best = class.best_mean;
    let means = inst.means(theta);
    let n = horizon as f64;
    let pseudo_regret = n * best - means.iter().zip(&counts).map(|(m, &c)| m * c as f64).sum::<f64>();
    let tol = inst.tolerances().mean_rel * best.abs().max(1.0);
    let pseudo_regret_gaps = means
        .iter()
        .zip(&counts)
        .filter(|(&m, _)| m < best - tol)
        .map(|(m, &c)| (best - m) * c as f64)
        .sum();
    let overshoot = (0..jobs).any(|f| counts[f] > 0 && groups.job_at(f).group > class.group);
    TrialLog {
        seed,
        policy: policy.kind(),
        theta,
        horizon,
        actions,
        counts,
        reward,
        pseudo_regret,
        pseudo_regret_gaps,
        realized_regret: n * best - reward,
        overshoot,
        final_group: group,
        events: policy.take_events(),
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::information::Tolerances;
    use crate::populations::{BernoulliModel, GroupStructure, ParameterPoint, ParameterSpace};
    use crate::strategy::{Oracle, RoundRobin};

    fn inst() -> Instance {
        let model = Arc::new(BernoulliModel::new(GroupStructure::new(vec![2]).unwrap()));
        let space = ParameterSpace::finite(vec![ParameterPoint::new(vec![0.2, 0.1])]).unwrap();
        Instance::new(model, space, Tolerances::default()).unwrap()
    }

    #[test]
    fn empty_horizon() {
        let i = inst();
        let log = run_trial(&i, &mut RoundRobin::new(&i), 0, 0, 1, true);
        assert_eq!(log.pseudo_regret, 0.0);
        assert!(log.actions.is_empty());
        assert_eq!(log.counts, vec![0, 0]);
    }

    #[test]
    fn round_robin_regret_is_deterministic() {
        let i = inst();
        let log = run_trial(&i, &mut RoundRobin::new(&i), 0, 1000, 1, false);
        assert_eq!(log.counts, vec![500, 500]);
        assert!((log.pseudo_regret - 50.0).abs() < 1e-9);
        assert!((log.pseudo_regret_gaps - 50.0).abs() < 1e-9);
    }

    #[test]
    fn oracle_has_zero_regret() {
        let i = inst();
        let log = run_trial(&i, &mut Oracle::new(&i, Some(0)).unwrap(), 0, 500, 3, true);
        assert_eq!(log.pseudo_regret, 0.0);
        assert_eq!(log.actions, vec![ActionRun { job: JobId::new(1, 1), count: 500 }]);
    }

    struct Backwards(u64);

    impl Policy for Backwards {
        fn kind(&self) -> PolicyKind {
            PolicyKind::PhiStar
        }
        fn next_action(&mut self) -> JobId {
            self.0 += 1;
            JobId::new(if self.0 == 1 { 2 } else { 1 }, 1)
        }
        fn observe(&mut self, _: JobId, _: State) {}
    }

    #[test]
    #[should_panic(expected = "partial-order violation")]
    fn backwards_policy_faults() {
        let model = Arc::new(BernoulliModel::new(GroupStructure::new(vec![1, 1]).unwrap()));
        let space = ParameterSpace::finite(vec![ParameterPoint::new(vec![0.2, 0.1])]).unwrap();
        let i = Instance::new(model, space, Tolerances::default()).unwrap();
        run_trial(&i, &mut Backwards(0), 0, 10, 0, false);
    }
}
