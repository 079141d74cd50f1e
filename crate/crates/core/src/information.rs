//! Information geometry of a finite parameter space: KL information numbers,
//! the partition of Θ by the group holding the first optimal job, optimal-job
//! sets `J(θ)` and bad sets `B_ℓ(θ)`.
//!
//! [`Instance`] bundles a model with a finite space and precomputes the law
//! and mean of every `(θ, job)` pair; everything downstream works with point
//! indices into the space.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::par::{self, Execution};
use crate::populations::{GroupStructure, JobId, Law, ParameterPoint, ParameterSpace, PopulationModel};
use crate::quadrature::kl_quadrature;

/// Numeric tolerances for mean comparisons and KL-zero tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Relative tolerance when comparing mean rewards (optimal sets, group argmax).
    pub mean_rel: f64,
    /// KL numbers at or below this count as zero for bad-set membership.
    pub kl_zero: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            mean_rel: 1e-9,
            kl_zero: 1e-12,
        }
    }
}

/// Where a parameter value sits in the partition of Θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    /// `ℓ` with `θ ∈ Θ_ℓ` (1-based).
    pub group: usize,
    /// `J(θ)`: 1-based indices of the optimal jobs in group `ℓ`, ascending.
    pub optimal_jobs: Vec<usize>,
    /// `θ ∈ Θ_ℓ*`: every optimal job lies in group `ℓ`.
    pub strict: bool,
    /// `μ*(θ)`.
    pub best_mean: f64,
}

impl Classification {
    pub fn is_optimal(&self, job: JobId) -> bool {
        job.group == self.group && self.optimal_jobs.binary_search(&job.index).is_ok()
    }

    /// The lowest-index optimal job.
    pub fn first_optimal(&self) -> JobId {
        JobId::new(self.group, self.optimal_jobs[0])
    }
}

/// Classifies a vector of per-job means (flattened job order).
pub fn classify_means(groups: &GroupStructure, means: &[f64], mean_rel: f64) -> Classification {
    let group_max: Vec<f64> = (1..=groups.num_groups())
        .map(|g| {
            groups
                .group_jobs(g)
                .map(|j| means[groups.flat_index(j)])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let best = group_max.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = mean_rel * best.abs().max(1.0);
    let group = group_max.iter().position(|&m| m >= best - tol).unwrap() + 1;
    let optimal_jobs: Vec<usize> = groups
        .group_jobs(group)
        .filter(|&j| means[groups.flat_index(j)] >= best - tol)
        .map(|j| j.index)
        .collect();
    let strict = group_max
        .iter()
        .enumerate()
        .all(|(g, &m)| g + 1 == group || m < best - tol);
    Classification {
        group,
        optimal_jobs,
        strict,
        best_mean: best,
    }
}

/// KL information number `I_ij(θ, θ')` of one job.
pub fn kl_number(
    model: &dyn PopulationModel,
    job: JobId,
    theta: &ParameterPoint,
    theta_prime: &ParameterPoint,
) -> Result<f64, ModelError> {
    let p = model.law(job, theta)?;
    let q = model.law(job, theta_prime)?;
    Ok(law_kl(&p, &q))
}

/// Closed form when available, quadrature otherwise.
pub fn law_kl(p: &Law, q: &Law) -> f64 {
    p.kl_closed_form(q).unwrap_or_else(|| kl_quadrature(p, q).max(0.0))
}

/// Classifies a single parameter value under `model`.
pub fn classify(model: &dyn PopulationModel, theta: &ParameterPoint, tol: &Tolerances) -> Result<Classification, ModelError> {
    model.validate_point(theta)?;
    let means = model
        .groups()
        .jobs()
        .map(|j| model.law(j, theta).map(|l| l.stationary_mean()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(classify_means(model.groups(), &means, tol.mean_rel))
}

/// A model together with a finite space and all per-point derived quantities.
#[derive(Debug, Clone)]
pub struct Instance {
    model: Arc<dyn PopulationModel>,
    space: ParameterSpace,
    laws: Vec<Vec<Law>>,
    means: Vec<Vec<f64>>,
    classes: Vec<Classification>,
    tolerances: Tolerances,
}

impl Instance {
    pub fn new(model: Arc<dyn PopulationModel>, space: ParameterSpace, tolerances: Tolerances) -> Result<Self, ModelError> {
        let jobs: Vec<JobId> = model.groups().jobs().collect();
        let mut laws = Vec::with_capacity(space.len());
        for (k, p) in space.points().iter().enumerate() {
            model
                .validate_point(p)
                .map_err(|e| ModelError::Config(format!("parameter #{k}: {e}")))?;
            laws.push(jobs.iter().map(|&j| model.law(j, p)).collect::<Result<Vec<_>, _>>()?);
        }
        let means: Vec<Vec<f64>> = laws
            .iter()
            .map(|row| row.iter().map(Law::stationary_mean).collect())
            .collect();
        let classes = means
            .iter()
            .map(|m| classify_means(model.groups(), m, tolerances.mean_rel))
            .collect();
        Ok(Instance {
            model,
            space,
            laws,
            means,
            classes,
            tolerances,
        })
    }

    pub fn model(&self) -> &Arc<dyn PopulationModel> {
        &self.model
    }

    pub fn space(&self) -> &ParameterSpace {
        &self.space
    }

    pub fn groups(&self) -> &GroupStructure {
        self.model.groups()
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tolerances
    }

    pub fn len(&self) -> usize {
        self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        self.space.is_empty()
    }

    /// Law of `job` under point `p`.
    #[inline]
    pub fn law(&self, p: usize, job: JobId) -> &Law {
        &self.laws[p][self.groups().flat_index(job)]
    }

    /// Laws of every job under point `p`, flattened job order.
    #[inline]
    pub fn laws(&self, p: usize) -> &[Law] {
        &self.laws[p]
    }

    #[inline]
    pub fn mean(&self, p: usize, job: JobId) -> f64 {
        self.means[p][self.groups().flat_index(job)]
    }

    pub fn means(&self, p: usize) -> &[f64] {
        &self.means[p]
    }

    pub fn class(&self, p: usize) -> &Classification {
        &self.classes[p]
    }

    /// `I_job(θ_p, θ_q)`.
    pub fn kl(&self, job: JobId, p: usize, q: usize) -> f64 {
        if p == q {
            return 0.0;
        }
        let f = self.groups().flat_index(job);
        law_kl(&self.laws[p][f], &self.laws[q][f])
    }

    /// `I_ij(θ_p, θ_q)` for every job, flattened order.
    pub fn kl_vector(&self, p: usize, q: usize) -> Vec<f64> {
        self.groups().jobs().map(|j| self.kl(j, p, q)).collect()
    }

    /// KL matrix of one job: rows θ, columns θ'.
    pub fn kl_matrix(&self, job: JobId, exec: Execution) -> Vec<Vec<f64>> {
        let n = self.len();
        par::map_indexed(exec, n, |p| (0..n).map(|q| self.kl(job, p, q)).collect())
    }

    /// Classification of a point that must belong to the space.
    pub fn classify(&self, theta: &ParameterPoint) -> Result<&Classification, ModelError> {
        Ok(&self.classes[self.space.require(theta)?])
    }

    /// Indices of `Θ_k`.
    pub fn group_members(&self, k: usize) -> Vec<usize> {
        (0..self.len()).filter(|&p| self.classes[p].group == k).collect()
    }

    /// Indices of `Θ_k*`.
    pub fn strict_members(&self, k: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&p| self.classes[p].group == k && self.classes[p].strict)
            .collect()
    }

    /// Indices of `Θ_kj`: points of `Θ_k` for which job `kj` is (first-)optimal.
    pub fn job_members(&self, job: JobId) -> Vec<usize> {
        (0..self.len()).filter(|&p| self.classes[p].is_optimal(job)).collect()
    }
}

/// Pointwise classification of the whole space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionReport {
    pub group_of: Vec<usize>,
    pub optimal_jobs: Vec<Vec<usize>>,
    pub strict: Vec<bool>,
    /// Groups `i` with `Θ_i* = ∅` (the supplied space makes group `i` redundant).
    pub redundant_groups: Vec<usize>,
    pub warnings: Vec<String>,
}

pub fn partition(inst: &Instance) -> PartitionReport {
    let n_groups = inst.groups().num_groups();
    let redundant_groups: Vec<usize> = (1..=n_groups)
        .filter(|&g| inst.strict_members(g).is_empty())
        .collect();
    let mut warnings: Vec<String> = redundant_groups
        .iter()
        .map(|g| format!("group {g} has no parameter whose optimal jobs all lie in it"))
        .collect();
    warnings.extend(information_warnings(inst));
    PartitionReport {
        group_of: (0..inst.len()).map(|p| inst.class(p).group).collect(),
        optimal_jobs: (0..inst.len()).map(|p| inst.class(p).optimal_jobs.clone()).collect(),
        strict: (0..inst.len()).map(|p| inst.class(p).strict).collect(),
        redundant_groups,
        warnings,
    }
}

/// Positive-information checks: group 1 must separate every pair of points,
/// and for θ beyond group `i`, each job `ij` must separate θ from `Θ_ij`.
fn information_warnings(inst: &Instance) -> Vec<String> {
    let tol = inst.tolerances().kl_zero;
    let groups = inst.groups();
    let mut out = Vec::new();
    let mut unseparated = 0usize;
    for p in 0..inst.len() {
        for q in 0..inst.len() {
            if p != q && groups.group_jobs(1).map(|j| inst.kl(j, p, q)).sum::<f64>() <= tol {
                unseparated += 1;
            }
        }
    }
    if unseparated > 0 {
        out.push(format!(
            "{unseparated} ordered parameter pairs cannot be separated by group-1 jobs"
        ));
    }
    for i in 1..groups.num_groups() {
        for job in groups.group_jobs(i) {
            let members = inst.job_members(job);
            for p in (0..inst.len()).filter(|&p| inst.class(p).group > i) {
                if let Some(&q) = members.iter().find(|&&q| inst.kl(job, p, q) <= tol) {
                    out.push(format!(
                        "job {job} cannot separate parameter #{p} from #{q} in its optimal region"
                    ));
                }
            }
        }
    }
    out
}

/// Bad set of one parameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BadSetReport {
    pub theta: usize,
    pub group: usize,
    pub optimal_jobs: Vec<usize>,
    pub members: Vec<usize>,
    pub tolerance: f64,
    /// Every member is separated from θ by each of its own optimal jobs.
    pub dual_positivity: bool,
}

/// `B_ℓ(θ)`: points of `Θ_ℓ` outside every `Θ_ℓj`, `j ∈ J(θ)`, that no optimal
/// job of θ can tell apart from θ.
pub fn bad_set(inst: &Instance, theta: usize, tolerance: f64) -> BadSetReport {
    let c = inst.class(theta);
    let ell = c.group;
    let members: Vec<usize> = (0..inst.len())
        .filter(|&q| {
            let cq = inst.class(q);
            cq.group == ell
                && !c.optimal_jobs.iter().any(|j| cq.optimal_jobs.contains(j))
                && c
                    .optimal_jobs
                    .iter()
                    .all(|&j| inst.kl(JobId::new(ell, j), theta, q) <= tolerance)
        })
        .collect();
    let dual_positivity = members.iter().all(|&q| {
        inst.class(q)
            .optimal_jobs
            .iter()
            .all(|&j| inst.kl(JobId::new(ell, j), theta, q) > tolerance)
    });
    debug_assert!(dual_positivity, "bad-set dual positivity failed for #{theta}");
    BadSetReport {
        theta,
        group: ell,
        optimal_jobs: c.optimal_jobs.clone(),
        members,
        tolerance,
        dual_positivity,
    }
}

/// `∪_{θ' ∈ H} B_ℓ(θ')`, ascending point order.
pub fn union_bad_set(inst: &Instance, h: &[usize], tolerance: f64) -> Result<Vec<usize>, ModelError> {
    let Some(&first) = h.first() else {
        return Err(ModelError::Precondition("union of bad sets over an empty set".into()));
    };
    let ell = inst.class(first).group;
    if let Some(&p) = h.iter().find(|&&p| inst.class(p).group != ell) {
        return Err(ModelError::Precondition(format!(
            "bad-set union spans groups {ell} and {} (point #{p})",
            inst.class(p).group
        )));
    }
    let mut out: Vec<usize> = h
        .iter()
        .flat_map(|&p| bad_set(inst, p, tolerance).members)
        .collect();
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Group-switch thresholds `β_1 > β_2 > … > β_{I−1}` of a phase model with
/// fixed `α`: `μ_i(θ) = μ_{i+1}(θ)` at `β = β_i`. Bisection to a bracket of 1e-10.
pub fn phase_thresholds(
    model: &dyn PopulationModel,
    alphas: &[f64],
    beta_lo: f64,
    beta_hi: f64,
) -> Result<Vec<f64>, ModelError> {
    let groups = model.groups();
    let group_best = |g: usize, beta: f64| -> Result<f64, ModelError> {
        let mut coords = alphas.to_vec();
        coords.push(beta);
        let theta = ParameterPoint::new(coords);
        groups
            .group_jobs(g)
            .map(|j| model.law(j, &theta).map(|l| l.stationary_mean()))
            .try_fold(f64::NEG_INFINITY, |acc, m| m.map(|m| acc.max(m)))
    };
    let mut out = Vec::new();
    for i in 1..groups.num_groups() {
        let f = |beta: f64| -> Result<f64, ModelError> { Ok(group_best(i, beta)? - group_best(i + 1, beta)?) };
        let (mut lo, mut hi) = (beta_lo, beta_hi);
        let (flo, fhi) = (f(lo)?, f(hi)?);
        if flo.signum() == fhi.signum() {
            return Err(ModelError::Precondition(format!(
                "groups {i} and {} do not switch within β ∈ [{beta_lo}, {beta_hi}]",
                i + 1
            )));
        }
        while hi - lo > 1e-10 {
            let mid = 0.5 * (lo + hi);
            if f(mid)?.signum() == flo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        out.push(0.5 * (lo + hi));
    }
    Ok(out)
}
