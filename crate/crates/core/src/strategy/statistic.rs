//! Log-likelihood bookkeeping, maximum likelihood estimation and the
//! mixture likelihood-ratio statistic `U_k(n; λ)`.
//!
//! Every observation of every job extends the log-likelihood of every point
//! in the space (the first observation of a job through its initial law,
//! later ones through the transition density). `U_k` is then recovered in
//! log space as `logsumexp_θ(log F_k(θ) + L(θ)) − L(λ)`.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::information::Instance;
use crate::populations::{JobId, State};

/// Running log-likelihood of every point of the space.
#[derive(Debug, Clone, PartialEq)]
pub struct LogLikelihoods {
    ll: Vec<f64>,
}

impl LogLikelihoods {
    pub fn new(points: usize) -> Self {
        LogLikelihoods { ll: vec![0.0; points] }
    }

    /// Adds one observation `y` of `job`, whose previous state was `prev`.
    #[inline]
    pub fn update(&mut self, inst: &Instance, job: JobId, prev: Option<State>, y: State) {
        let f = inst.groups().flat_index(job);
        for (p, v) in self.ll.iter_mut().enumerate() {
            *v += inst.laws(p)[f].log_next(prev, y);
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.ll
    }

    /// Index of the largest log-likelihood; ties go to the earliest point.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (p, &v) in self.ll.iter().enumerate().skip(1) {
            if v > self.ll[best] {
                best = p;
            }
        }
        best
    }
}

/// Log-likelihoods of every point given per-job observation histories
/// (flattened job order; each history starts with the initial state).
pub fn log_likelihoods(inst: &Instance, histories: &[Vec<State>]) -> LogLikelihoods {
    let mut ll = LogLikelihoods::new(inst.len());
    for (f, h) in histories.iter().enumerate() {
        let job = inst.groups().job_at(f);
        let mut prev = None;
        for &y in h {
            ll.update(inst, job, prev, y);
            prev = Some(y);
        }
    }
    ll
}

/// Maximum likelihood estimate from the histories of the group-1 jobs.
pub fn mle(inst: &Instance, histories: &[Vec<State>]) -> Result<usize, ModelError> {
    let group1 = inst.groups().group_size(1);
    if histories.len() < group1 || histories[..group1].iter().all(Vec::is_empty) {
        return Err(ModelError::Precondition(
            "maximum likelihood estimation needs at least one group-1 observation".into(),
        ));
    }
    Ok(log_likelihoods(inst, &histories[..group1]).argmax())
}

/// Mixing distribution `F_k` over the atoms `∪_{i ≥ k} Θ_i`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Prior {
    #[default]
    Uniform,
    /// Positive weights per point of the space, renormalized over the atoms.
    Weights(Vec<f64>),
}

impl Prior {
    pub fn validate(&self, points: usize) -> Result<(), ModelError> {
        if let Prior::Weights(w) = self {
            if w.len() != points {
                return Err(ModelError::Config(format!(
                    "prior has {} weights for a space of {points} points",
                    w.len()
                )));
            }
            if w.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                return Err(ModelError::Config("prior weights must be positive and finite".into()));
            }
        }
        Ok(())
    }

    /// Log-weights over `atoms`, normalized to sum to one.
    pub fn log_weights(&self, atoms: &[usize]) -> Vec<f64> {
        match self {
            Prior::Uniform => vec![-(atoms.len() as f64).ln(); atoms.len()],
            Prior::Weights(w) => {
                let total: f64 = atoms.iter().map(|&p| w[p]).sum();
                atoms.iter().map(|&p| (w[p] / total).ln()).collect()
            }
        }
    }
}

/// The statistic for one group `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestStatistic {
    pub group: usize,
    atoms: Vec<usize>,
    log_prior: Vec<f64>,
}

impl TestStatistic {
    pub fn new(inst: &Instance, group: usize, prior: &Prior) -> Self {
        let atoms: Vec<usize> = (0..inst.len()).filter(|&p| inst.class(p).group >= group).collect();
        let log_prior = prior.log_weights(&atoms);
        TestStatistic {
            group,
            atoms,
            log_prior,
        }
    }

    pub fn atoms(&self) -> &[usize] {
        &self.atoms
    }

    /// `log Σ_θ F_k(θ) exp(L(θ))`.
    pub fn log_numerator(&self, ll: &LogLikelihoods) -> f64 {
        log_sum_exp(self.atoms.iter().zip(&self.log_prior).map(|(&p, &w)| w + ll.ll[p]))
    }

    /// `log U_k(n; λ)`.
    pub fn log_u(&self, ll: &LogLikelihoods, lambda: usize) -> f64 {
        self.log_numerator(ll) - ll.ll[lambda]
    }
}

pub fn log_sum_exp(it: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = it.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + it.map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// How the testing stage decides that a job is rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectionMode {
    /// Reject λ permanently once `U_k(n; λ) ≥ N`; reject job `kj` once every
    /// λ in its optimal region has been rejected at some time.
    #[default]
    TrackLambda,
    /// Reject job `kj` when `inf_{λ ∈ Θ_kj} U_k(n; λ) ≥ N` at the current `n`.
    Infimum,
}

/// Which parameters and jobs of group `k` have been rejected so far.
#[derive(Debug, Clone, PartialEq)]
pub struct RejectionState {
    pub group: usize,
    /// Per point of the space (only points of `Θ_k` are ever set).
    pub lambda_rejected: Vec<bool>,
    /// Per job index of group `k` (0-based slot `j − 1`).
    pub job_rejected: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    /// Newly rejected parameters with their `log U`.
    pub lambdas: Vec<(usize, f64)>,
    /// Newly rejected jobs with the `log U` that triggered them (`None` when
    /// the optimal region of the job is empty).
    pub jobs: Vec<(JobId, Option<f64>)>,
}

impl RejectionState {
    pub fn new(inst: &Instance, group: usize) -> Self {
        RejectionState {
            group,
            lambda_rejected: vec![false; inst.len()],
            job_rejected: vec![false; inst.groups().group_size(group)],
        }
    }

    pub fn is_rejected(&self, job: JobId) -> bool {
        job.group == self.group && self.job_rejected[job.index - 1]
    }

    pub fn all_rejected(&self) -> bool {
        self.job_rejected.iter().all(|&r| r)
    }
}

/// One rejection pass at the current sample: `members[j-1]` is `Θ_kj`.
pub fn rejection_sweep(
    ts: &TestStatistic,
    ll: &LogLikelihoods,
    state: &mut RejectionState,
    members: &[Vec<usize>],
    log_threshold: f64,
    mode: RejectionMode,
) -> SweepOutcome {
    let k = state.group;
    let num = ts.log_numerator(ll);
    let mut out = SweepOutcome {
        lambdas: Vec::new(),
        jobs: Vec::new(),
    };
    match mode {
        RejectionMode::TrackLambda => {
            for (slot, region) in members.iter().enumerate() {
                if state.job_rejected[slot] {
                    continue;
                }
                let mut last = None;
                for &lambda in region {
                    if !state.lambda_rejected[lambda] {
                        let lu = num - ll.ll[lambda];
                        if lu >= log_threshold {
                            state.lambda_rejected[lambda] = true;
                            out.lambdas.push((lambda, lu));
                            last = Some(lu);
                        }
                    }
                }
                if region.iter().all(|&l| state.lambda_rejected[l]) {
                    state.job_rejected[slot] = true;
                    out.jobs.push((JobId::new(k, slot + 1), last));
                }
            }
            // Parameters shared by rejected jobs still count toward other jobs.
            out.lambdas.sort_unstable_by_key(|a| a.0);
            out.lambdas.dedup_by_key(|a| a.0);
        }
        RejectionMode::Infimum => {
            for (slot, region) in members.iter().enumerate() {
                if state.job_rejected[slot] {
                    continue;
                }
                let inf = region
                    .iter()
                    .map(|&l| num - ll.ll[l])
                    .fold(f64::INFINITY, f64::min);
                if inf >= log_threshold {
                    state.job_rejected[slot] = true;
                    out.jobs.push((JobId::new(k, slot + 1), inf.is_finite().then_some(inf)));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::information::Tolerances;
    use crate::populations::{BernoulliModel, GroupStructure, ParameterPoint, ParameterSpace};

    fn inst(groups: Vec<usize>, pts: Vec<Vec<f64>>) -> Instance {
        let model = Arc::new(BernoulliModel::new(GroupStructure::new(groups).unwrap()));
        let space = ParameterSpace::finite(pts.into_iter().map(ParameterPoint::new).collect()).unwrap();
        Instance::new(model, space, Tolerances::default()).unwrap()
    }

    #[test]
    fn mle_example_values() {
        let i = inst(vec![1], vec![vec![0.2], vec![0.8]]);
        let ll = log_likelihoods(&i, &[vec![1.0, 1.0, 1.0, 0.0]]);
        assert!((ll.values()[0] - (3.0 * 0.2f64.ln() + 0.8f64.ln())).abs() < 1e-12);
        assert!((ll.values()[0] + 5.052).abs() < 1e-3);
        assert!((ll.values()[1] + 2.279).abs() < 1e-3);
        assert_eq!(mle(&i, &[vec![1.0, 1.0, 1.0, 0.0]]).unwrap(), 1);
        assert_eq!(mle(&i, &[vec![1.0, 0.0]]).unwrap(), 0);
        assert!(mle(&i, &[vec![]]).is_err());
    }

    #[test]
    fn hand_evaluated_statistic() {
        let i = inst(vec![1], vec![vec![0.8], vec![0.2]]);
        let ts = TestStatistic::new(&i, 1, &Prior::Uniform);
        let mut ll = LogLikelihoods::new(2);
        assert!(ts.log_u(&ll, 1).abs() < 1e-15);
        ll.update(&i, JobId::new(1, 1), None, 1.0);
        assert!((ts.log_u(&ll, 1).exp() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn point_mass_prior_keeps_u_at_one() {
        let i = inst(vec![1], vec![vec![0.8], vec![0.2]]);
        let ts = TestStatistic::new(&i, 1, &Prior::Weights(vec![1e-300, 1.0]));
        let mut ll = LogLikelihoods::new(2);
        for y in [1.0, 0.0, 1.0] {
            ll.update(&i, JobId::new(1, 1), Some(0.0), y);
        }
        assert!(ts.log_u(&ll, 1).abs() < 1e-12);
    }

    #[test]
    fn huge_threshold_rejects_nothing() {
        let i = inst(vec![2], vec![vec![0.2, 0.1], vec![0.2, 0.3]]);
        let ts = TestStatistic::new(&i, 1, &Prior::Uniform);
        let mut ll = LogLikelihoods::new(2);
        for y in [1.0, 1.0, 0.0] {
            ll.update(&i, JobId::new(1, 2), None, y);
        }
        let mut st = RejectionState::new(&i, 1);
        let members = vec![i.job_members(JobId::new(1, 1)), i.job_members(JobId::new(1, 2))];
        let out = rejection_sweep(&ts, &ll, &mut st, &members, (1e12f64).ln(), RejectionMode::TrackLambda);
        assert!(out.lambdas.is_empty() && out.jobs.is_empty());
    }

    #[test]
    fn empty_region_is_rejected_at_once() {
        let i = inst(vec![2], vec![vec![0.2, 0.1]]);
        let ts = TestStatistic::new(&i, 1, &Prior::Uniform);
        let ll = LogLikelihoods::new(1);
        let members = vec![i.job_members(JobId::new(1, 1)), i.job_members(JobId::new(1, 2))];
        for mode in [RejectionMode::TrackLambda, RejectionMode::Infimum] {
            let mut st = RejectionState::new(&i, 1);
            let out = rejection_sweep(&ts, &ll, &mut st, &members, 100.0, mode);
            assert_eq!(out.jobs, vec![(JobId::new(1, 2), None)]);
        }
    }

    #[test]
    fn log_sum_exp_is_stable() {
        let v = [-1000.0, -1000.0];
        assert!((log_sum_exp(v.iter().copied()) - (-1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(std::iter::empty::<f64>()), f64::NEG_INFINITY);
    }
}
