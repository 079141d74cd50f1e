//! Randomized experiment configurations and the structural checks shared by
//! the property tests and the acceptance run.

#![allow(dead_code)]

use std::path::Path;

use precedence_bandit::harness::{
    monte_carlo, run_trial, write_outputs, Experiment, ExperimentConfig, PointRef, SpaceSpec,
};
use precedence_bandit::information::{bad_set, classify_means, partition};
use precedence_bandit::par::Execution;
use precedence_bandit::populations::ModelSpec;
use precedence_bandit::strategy::{PhiStar, PhiStarPlan, PolicyKind, StrategyConfig};
use precedence_bandit::{JobId, Tolerances};
use proptest::prelude::*;
use std::sync::Arc;

/// A small random Bernoulli instance.
#[derive(Debug, Clone)]
pub struct Case {
    pub groups: Vec<usize>,
    pub points: Vec<Vec<f64>>,
    pub truth: usize,
    pub horizon: u64,
    pub seed: u64,
}

/// Coordinates on a coarse lattice so ties, shared laws and nonempty bad
/// sets occur often.
fn coord() -> impl Strategy<Value = f64> {
    (1u32..10).prop_map(|k| f64::from(k) / 10.0)
}

pub fn case() -> impl Strategy<Value = Case> {
    prop::collection::vec(1usize..=3, 1..=3)
        .prop_flat_map(|groups| {
            let jobs: usize = groups.iter().sum();
            (
                Just(groups),
                prop::collection::vec(prop::collection::vec(coord(), jobs), 2..=6),
                any::<prop::sample::Index>(),
                20u64..3000,
                any::<u64>(),
            )
        })
        .prop_map(|(groups, mut points, truth, horizon, seed)| {
            points.sort_by(|a, b| a.partial_cmp(b).unwrap());
            points.dedup();
            let truth = truth.index(points.len());
            Case {
                groups,
                points,
                truth,
                horizon,
                seed,
            }
        })
}

impl Case {
    pub fn config(&self, policies: Vec<PolicyKind>, replications: usize) -> ExperimentConfig {
        ExperimentConfig {
            model: ModelSpec::Bernoulli {
                groups: self.groups.clone(),
                coords: None,
            },
            space: SpaceSpec {
                points: Some(self.points.clone()),
                grid: None,
                delta: None,
            },
            truth: vec![PointRef::Index(self.truth)],
            horizons: vec![self.horizon],
            replications,
            policies,
            strategy: StrategyConfig::default(),
            seed: self.seed,
            tolerances: Tolerances::default(),
            execution: Execution::default(),
            wald: None,
            sweep: None,
            output_dir: None,
        }
    }

    pub fn experiment(&self) -> Experiment {
        self.config(vec![PolicyKind::PhiStar], 1).build().expect("generated configs are valid")
    }
}

/// φ* never moves back to an earlier group, the counts exhaust the horizon
/// and the two forms of pseudo-regret agree.
pub fn check_trial(case: &Case) -> Result<(), TestCaseError> {
    let exp = case.experiment();
    let inst = exp.instance.clone();
    let plan = Arc::new(PhiStarPlan::new(
        inst.clone(),
        case.horizon,
        &StrategyConfig::default(),
        Execution::Sequential,
    )
    .expect("default strategy settings are valid"));
    let mut policy = PhiStar::new(plan);
    let log = run_trial(&inst, &mut policy, case.truth, case.horizon, case.seed, true);
    let groups: Vec<usize> = log.actions.iter().map(|r| r.job.group).collect();
    prop_assert!(groups.windows(2).all(|w| w[0] <= w[1]), "actions went backwards: {groups:?}");
    prop_assert_eq!(log.actions.iter().map(|r| r.count).sum::<u64>(), case.horizon);
    prop_assert_eq!(log.counts.iter().sum::<u64>(), case.horizon);
    let scale = 1e-9 * case.horizon.max(1) as f64;
    prop_assert!(log.pseudo_regret >= -scale);
    prop_assert!(
        (log.pseudo_regret - log.pseudo_regret_gaps).abs() <= scale,
        "{} vs {}",
        log.pseudo_regret,
        log.pseudo_regret_gaps
    );
    Ok(())
}

/// Every point belongs to exactly the group of its first optimal job and
/// every bad-set member is separated from θ by each of its own optimal jobs.
pub fn check_partition(case: &Case) -> Result<(), TestCaseError> {
    let exp = case.experiment();
    let inst = &exp.instance;
    let part = partition(inst);
    let groups = inst.groups();
    for p in 0..inst.len() {
        let c = classify_means(groups, inst.means(p), inst.tolerances().mean_rel);
        prop_assert_eq!(part.group_of[p], c.group);
        prop_assert_eq!(c.first_optimal().group, c.group);
        let members = (1..=groups.num_groups())
            .filter(|&k| inst.group_members(k).contains(&p))
            .count();
        prop_assert_eq!(members, 1, "point {} lies in {} groups", p, members);
        let best = c.best_mean;
        for job in groups.jobs().filter(|j| j.group < c.group) {
            prop_assert!(inst.mean(p, job) < best);
        }
        let b = bad_set(inst, p, inst.tolerances().kl_zero);
        prop_assert!(b.dual_positivity);
        for &q in &b.members {
            let cq = inst.class(q);
            for &j in &cq.optimal_jobs {
                prop_assert!(inst.kl(JobId::new(cq.group, j), p, q) > 0.0);
            }
            for &j in &c.optimal_jobs {
                prop_assert!(inst.kl(JobId::new(c.group, j), p, q) <= inst.tolerances().kl_zero);
            }
        }
    }
    Ok(())
}

/// Two runs of the same configuration write byte-identical CSV files, both
/// under the same execution mode and across parallel and sequential runs.
pub fn check_reproducible(case: &Case, root: &Path) -> Result<(), TestCaseError> {
    let policies = vec![PolicyKind::PhiStar, PolicyKind::GreedyMle, PolicyKind::RoundRobin];
    let mut cfg = case.config(policies, 3);
    let mut outputs = Vec::new();
    for (k, exec) in [Execution::Parallel, Execution::Parallel, Execution::Sequential]
        .into_iter()
        .enumerate()
    {
        cfg.execution = exec;
        let exp = cfg.build().expect("generated configs are valid");
        let report = monte_carlo(&exp, &[case.horizon], false).expect("simulation succeeds");
        let dir = root.join(format!("run{k}"));
        write_outputs(&report, &dir, false).expect("outputs are written");
        let files: Vec<Vec<u8>> = ["raw.csv", "aggregate.csv", "summary.csv"]
            .iter()
            .map(|f| std::fs::read(dir.join(f)).expect("output exists"))
            .collect();
        outputs.push(files);
    }
    prop_assert!(outputs[0] == outputs[1], "reruns differ");
    prop_assert!(outputs[0] == outputs[2], "parallel and sequential runs differ");
    Ok(())
}
