//! The lower-bound linear program.
//!
//! For θ ∈ Θ_ℓ the experimentation levels `z_ij(θ)` are defined for every job
//! of groups `i < ℓ` and for the non-optimal jobs of group `ℓ`. The program
//! minimizes `Σ (μ*(θ) − μ_ij(θ)) z_ij` subject to
//!
//! * for each `k < ℓ` and each θ' in `Θ_k`: `Σ_{i ≤ k} Σ_j I_ij(θ, θ') z_ij ≥ 1`;
//! * for each θ' in `B_ℓ(θ)`: the same sum over every variable `≥ 1`.
//!
//! Its optimum `z(θ, ℓ)` is the constant in the `z(θ, ℓ) log N` regret lower
//! bound. Over a finite space every infimum expands to one row per θ'.

mod simplex;

pub use simplex::{minimize, minimize_lexicographic, Constraint, LpSolution, Relation};

use serde::{Deserialize, Serialize};

use crate::error::AllocationError;
use crate::information::{bad_set, Instance};
use crate::par::{self, Execution};
use crate::populations::JobId;

/// Tolerance under which an expanded constraint counts as satisfied.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-9;

/// Which parameter values index the rows of the earlier-group blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowIndexing {
    /// Rows for every θ' ∈ Θ_k.
    #[default]
    Group,
    /// Rows for θ' ∈ Θ_k* only.
    Strict,
}

#[derive(Debug, Clone, Default)]
pub struct AllocationOptions {
    pub row_indexing: RowIndexing,
    /// Replaces `B_ℓ(θ)` in the last block (used with unions of bad sets).
    pub bad_set_override: Option<Vec<usize>>,
}

/// One expanded constraint row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintRow {
    /// `k` for the earlier-group blocks, `ℓ` for the bad-set block.
    pub block: usize,
    pub theta_prime: usize,
    /// Coefficients `I_ij(θ, θ')` over [`AllocationProblem::variables`].
    pub coeffs: Vec<f64>,
}

/// The expanded linear program for one θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationProblem {
    pub theta: usize,
    pub group: usize,
    pub variables: Vec<JobId>,
    pub gaps: Vec<f64>,
    pub rows: Vec<ConstraintRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobAllocation {
    pub job: JobId,
    pub gap: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BindingConstraint {
    pub row: usize,
    pub block: usize,
    pub theta_prime: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationSolution {
    pub theta: usize,
    pub group: usize,
    pub z: Vec<JobAllocation>,
    pub objective: f64,
    pub constraint_count: usize,
    pub binding_constraints: Vec<BindingConstraint>,
}

impl AllocationSolution {
    /// `z_ij(θ)`, zero for jobs outside the variable set.
    pub fn z_of(&self, job: JobId) -> f64 {
        self.z.iter().find(|a| a.job == job).map_or(0.0, |a| a.z)
    }

    /// A solution with no variables in play (used when the LP is skipped).
    pub fn zero(theta: usize, group: usize) -> Self {
        AllocationSolution {
            theta,
            group,
            z: Vec::new(),
            objective: 0.0,
            constraint_count: 0,
            binding_constraints: Vec::new(),
        }
    }
}

/// A constraint failing by `shortfall = 1 − lhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub block: usize,
    pub theta_prime: usize,
    pub shortfall: f64,
}

/// Variables of the program for θ: all jobs of groups `< ℓ` and the
/// non-optimal jobs of group `ℓ`, in job order.
pub fn variables(inst: &Instance, theta: usize) -> Vec<JobId> {
    let c = inst.class(theta);
    inst.groups()
        .jobs()
        .filter(|j| j.group < c.group || (j.group == c.group && !c.optimal_jobs.contains(&j.index)))
        .collect()
}

fn row_for(inst: &Instance, theta: usize, vars: &[JobId], block: usize, theta_prime: usize, last: bool) -> ConstraintRow {
    let coeffs = vars
        .iter()
        .map(|&j| {
            if last || j.group <= block {
                inst.kl(j, theta, theta_prime)
            } else {
                0.0
            }
        })
        .collect();
    ConstraintRow {
        block,
        theta_prime,
        coeffs,
    }
}

/// Expands the program for θ into explicit rows.
pub fn build_problem(inst: &Instance, theta: usize, opts: &AllocationOptions) -> AllocationProblem {
    let c = inst.class(theta);
    let ell = c.group;
    let vars = variables(inst, theta);
    let gaps = vars.iter().map(|&j| c.best_mean - inst.mean(theta, j)).collect();
    let mut rows = Vec::new();
    for k in 1..ell {
        let members = match opts.row_indexing {
            RowIndexing::Group => inst.group_members(k),
            RowIndexing::Strict => inst.strict_members(k),
        };
        rows.extend(members.into_iter().map(|q| row_for(inst, theta, &vars, k, q, false)));
    }
    let bad = match &opts.bad_set_override {
        Some(b) => b.clone(),
        None => bad_set(inst, theta, inst.tolerances().kl_zero).members,
    };
    rows.extend(bad.into_iter().map(|q| row_for(inst, theta, &vars, ell, q, true)));
    AllocationProblem {
        theta,
        group: ell,
        variables: vars,
        gaps,
        rows,
    }
}

fn check_rows(problem: &AllocationProblem, kl_zero: f64) -> Result<(), AllocationError> {
    for (r, row) in problem.rows.iter().enumerate() {
        if row.coeffs.iter().all(|&v| v <= kl_zero) {
            return Err(AllocationError::AssumptionViolation {
                row: r,
                theta_prime: row.theta_prime,
            });
        }
    }
    Ok(())
}

/// Solves an expanded program, reporting the lexicographically smallest optimum.
pub fn solve_problem(problem: &AllocationProblem, kl_zero: f64) -> Result<AllocationSolution, AllocationError> {
    check_rows(problem, kl_zero)?;
    let cons: Vec<Constraint> = problem
        .rows
        .iter()
        .map(|r| Constraint {
            coeffs: r.coeffs.clone(),
            relation: Relation::Ge,
            rhs: 1.0,
        })
        .collect();
    let sol = minimize_lexicographic(&problem.gaps, &cons)?;
    let binding_constraints = problem
        .rows
        .iter()
        .enumerate()
        .filter(|(_, r)| lhs(&r.coeffs, &sol.x) - 1.0 <= FEASIBILITY_TOLERANCE)
        .map(|(row, r)| BindingConstraint {
            row,
            block: r.block,
            theta_prime: r.theta_prime,
        })
        .collect();
    Ok(AllocationSolution {
        theta: problem.theta,
        group: problem.group,
        z: problem
            .variables
            .iter()
            .zip(&problem.gaps)
            .zip(&sol.x)
            .map(|((&job, &gap), &z)| JobAllocation { job, gap, z })
            .collect(),
        objective: sol.objective,
        constraint_count: problem.rows.len(),
        binding_constraints,
    })
}

fn lhs(coeffs: &[f64], z: &[f64]) -> f64 {
    coeffs.iter().zip(z).map(|(a, b)| a * b).sum()
}

/// `z(θ, ℓ)` and the per-job levels for point `theta`.
pub fn solve_allocation(inst: &Instance, theta: usize, opts: &AllocationOptions) -> Result<AllocationSolution, AllocationError> {
    solve_problem(&build_problem(inst, theta, opts), inst.tolerances().kl_zero)
}

/// [`solve_allocation`] for every point of the space.
pub fn solve_all(
    inst: &Instance,
    opts: &AllocationOptions,
    exec: Execution,
) -> Vec<Result<AllocationSolution, AllocationError>> {
    par::map_indexed(exec, inst.len(), |p| solve_allocation(inst, p, opts))
}

/// Optimum with one parameter value per block: `λ_k ∈ Θ_k*` for `k < ℓ`
/// and, when `B_ℓ(θ)` is nonempty, a final `λ_ℓ ∈ B_ℓ(θ)`.
pub fn solve_relaxation(inst: &Instance, theta: usize, lambda: &[usize]) -> Result<f64, AllocationError> {
    let c = inst.class(theta);
    let ell = c.group;
    let bad = bad_set(inst, theta, inst.tolerances().kl_zero).members;
    let expected = ell - 1 + usize::from(!bad.is_empty());
    if lambda.len() != expected {
        return Err(AllocationError::InvalidLambda(format!(
            "expected {expected} components, got {}",
            lambda.len()
        )));
    }
    let vars = variables(inst, theta);
    let mut rows = Vec::with_capacity(expected);
    for (k, &q) in lambda.iter().enumerate() {
        let block = k + 1;
        if q >= inst.len() {
            return Err(AllocationError::InvalidLambda(format!("parameter #{q} is not in the space")));
        }
        if block < ell {
            let cq = inst.class(q);
            if cq.group != block || !cq.strict {
                return Err(AllocationError::InvalidLambda(format!(
                    "component {block} (#{q}) must lie in the strict region of group {block}"
                )));
            }
            rows.push(row_for(inst, theta, &vars, block, q, false));
        } else {
            if !bad.contains(&q) {
                return Err(AllocationError::InvalidLambda(format!(
                    "last component #{q} is not in the bad set of #{theta}"
                )));
            }
            rows.push(row_for(inst, theta, &vars, ell, q, true));
        }
    }
    let problem = AllocationProblem {
        theta,
        group: ell,
        gaps: vars.iter().map(|&j| c.best_mean - inst.mean(theta, j)).collect(),
        variables: vars,
        rows,
    };
    Ok(solve_problem(&problem, inst.tolerances().kl_zero)?.objective)
}

/// Enumerates every admissible λ and returns the largest relaxation value
/// together with a maximizing λ.
pub fn relaxation_supremum(inst: &Instance, theta: usize) -> Result<(f64, Vec<usize>), AllocationError> {
    let ell = inst.class(theta).group;
    let mut sets: Vec<Vec<usize>> = (1..ell).map(|k| inst.strict_members(k)).collect();
    let bad = bad_set(inst, theta, inst.tolerances().kl_zero).members;
    if !bad.is_empty() {
        sets.push(bad);
    }
    if sets.iter().any(Vec::is_empty) {
        return Err(AllocationError::InvalidLambda("the set of admissible λ is empty".into()));
    }
    let mut best = (f64::NEG_INFINITY, Vec::new());
    let mut idx = vec![0usize; sets.len()];
    loop {
        let lambda: Vec<usize> = idx.iter().zip(&sets).map(|(&i, s)| s[i]).collect();
        let v = solve_relaxation(inst, theta, &lambda)?;
        if v > best.0 {
            best = (v, lambda);
        }
        let mut k = 0;
        loop {
            if k == idx.len() {
                return Ok(if best.0.is_finite() { best } else { (0.0, Vec::new()) });
            }
            idx[k] += 1;
            if idx[k] < sets[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Expanded constraints violated by `z` beyond [`FEASIBILITY_TOLERANCE`].
pub fn feasibility_check(
    inst: &Instance,
    theta: usize,
    z: &[JobAllocation],
    opts: &AllocationOptions,
) -> Vec<Violation> {
    let problem = build_problem(inst, theta, opts);
    let zv: Vec<f64> = problem
        .variables
        .iter()
        .map(|j| z.iter().find(|a| a.job == *j).map_or(0.0, |a| a.z))
        .collect();
    problem
        .rows
        .iter()
        .filter_map(|r| {
            let shortfall = 1.0 - lhs(&r.coeffs, &zv);
            (shortfall > FEASIBILITY_TOLERANCE).then_some(Violation {
                block: r.block,
                theta_prime: r.theta_prime,
                shortfall,
            })
        })
        .collect()
}
