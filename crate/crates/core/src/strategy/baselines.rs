//! Comparison policies.
//!
//! * [`Oracle`] knows θ and plays a fixed optimal job from the start.
//! * [`RoundRobin`] cycles through group 1 forever and never advances.
//! * [`GreedyMle`] estimates θ, then repeatedly plays the job that looks best
//!   under the current maximum likelihood estimate, re-estimating after every
//!   block of `n0` plays, with no testing safeguard.

use std::sync::Arc;

use super::statistic::LogLikelihoods;
use super::{Event, Policy, PolicyKind};
use crate::error::ModelError;
use crate::information::Instance;
use crate::populations::{JobId, State};

#[derive(Debug, Clone)]
pub struct Oracle {
    job: JobId,
}

impl Oracle {
    pub fn new(inst: &Instance, truth: Option<usize>) -> Result<Self, ModelError> {
        let theta = truth.ok_or_else(|| ModelError::Config("the oracle policy needs the true parameter".into()))?;
        Ok(Oracle {
            job: inst.class(theta).first_optimal(),
        })
    }
}

impl Policy for Oracle {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Oracle
    }

    fn next_action(&mut self) -> JobId {
        self.job
    }

    fn observe(&mut self, _job: JobId, _y: State) {}
}

#[derive(Debug, Clone)]
pub struct RoundRobin {
    size: usize,
    next: usize,
}

impl RoundRobin {
    pub fn new(inst: &Instance) -> Self {
        RoundRobin {
            size: inst.groups().group_size(1),
            next: 0,
        }
    }
}

impl Policy for RoundRobin {
    fn kind(&self) -> PolicyKind {
        PolicyKind::RoundRobin
    }

    fn next_action(&mut self) -> JobId {
        let j = JobId::new(1, self.next + 1);
        self.next = (self.next + 1) % self.size;
        j
    }

    fn observe(&mut self, _job: JobId, _y: State) {}
}

#[derive(Debug)]
pub struct GreedyMle {
    inst: Arc<Instance>,
    n0: u64,
    ll: LogLikelihoods,
    last: Vec<Option<State>>,
    t: u64,
    current: JobId,
    remaining: u64,
    estimation: std::vec::IntoIter<JobId>,
    events: Vec<Event>,
}

impl GreedyMle {
    pub fn new(inst: Arc<Instance>, n0: u64) -> Self {
        let n0 = n0.max(1);
        let estimation: Vec<JobId> = inst
            .groups()
            .group_jobs(1)
            .flat_map(|j| std::iter::repeat_n(j, n0 as usize))
            .collect();
        GreedyMle {
            ll: LogLikelihoods::new(inst.len()),
            last: vec![None; inst.groups().total_jobs()],
            t: 0,
            current: JobId::new(1, 1),
            remaining: 0,
            estimation: estimation.into_iter(),
            events: Vec::new(),
            n0,
            inst,
        }
    }

    fn choose(&mut self) {
        let theta_hat = self.ll.argmax();
        let mut best: Option<JobId> = None;
        for j in self.inst.groups().jobs().filter(|j| j.group >= self.current.group) {
            if best.is_none_or(|b| self.inst.mean(theta_hat, j) > self.inst.mean(theta_hat, b)) {
                best = Some(j);
            }
        }
        let job = best.expect("nonempty group structure");
        if job != self.current {
            self.events.push(Event::Greedy {
                t: self.t,
                theta_hat,
                job,
            });
        }
        self.current = job;
        self.remaining = self.n0;
    }
}

impl Policy for GreedyMle {
    fn kind(&self) -> PolicyKind {
        PolicyKind::GreedyMle
    }

    fn next_action(&mut self) -> JobId {
        if let Some(j) = self.estimation.next() {
            self.current = j;
            return j;
        }
        if self.remaining == 0 {
            self.choose();
        }
        self.remaining -= 1;
        self.current
    }

    fn observe(&mut self, job: JobId, y: State) {
        let f = self.inst.groups().flat_index(job);
        self.ll.update(&self.inst, job, self.last[f], y);
        self.last[f] = Some(y);
        self.t += 1;
    }

    fn take_events(&mut self) -> Vec<Event> {
        std::mem::take(&mut self.events)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::information::Tolerances;
    use crate::populations::{BernoulliModel, GroupStructure, ParameterPoint, ParameterSpace};

    fn inst() -> Arc<Instance> {
        let model = Arc::new(BernoulliModel::new(GroupStructure::new(vec![2, 1]).unwrap()));
        let space = ParameterSpace::finite(vec![
            ParameterPoint::new(vec![0.2, 0.1, 0.05]),
            ParameterPoint::new(vec![0.2, 0.1, 0.9]),
        ])
        .unwrap();
        Arc::new(Instance::new(model, space, Tolerances::default()).unwrap())
    }

    #[test]
    fn oracle_needs_truth_and_plays_first_optimal() {
        let i = inst();
        assert!(Oracle::new(&i, None).is_err());
        let mut o = Oracle::new(&i, Some(1)).unwrap();
        assert_eq!(o.next_action(), JobId::new(2, 1));
    }

    #[test]
    fn round_robin_cycles_group_one() {
        let mut r = RoundRobin::new(&inst());
        let idx: Vec<usize> = (0..5).map(|_| r.next_action().index).collect();
        assert_eq!(idx, vec![1, 2, 1, 2, 1]);
    }

    #[test]
    fn greedy_moves_forward_only() {
        let i = inst();
        let mut g = GreedyMle::new(i, 2);
        let mut groups = Vec::new();
        for _ in 0..12 {
            let j = g.next_action();
            groups.push(j.group);
            g.observe(j, 1.0);
        }
        assert!(groups.windows(2).all(|w| w[0] <= w[1]));
    }
}
