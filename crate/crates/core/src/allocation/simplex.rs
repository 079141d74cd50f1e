//! Dense two-phase primal simplex with Bland's anti-cycling rule.
//!
//! Solves `minimize cᵀx subject to rows (≥ | ≤ | =) and x ≥ 0`. Problem sizes
//! here are a few dozen variables and at most a few hundred rows, so a full
//! tableau is the simplest robust choice.

use crate::error::AllocationError;

const PIVOT_EPS: f64 = 1e-12;
const FEAS_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Ge,
    Le,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

struct Tableau {
    /// `rows × (cols + 1)`; last column is the right-hand side.
    a: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.a[r][c];
        for v in self.a[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.a[r].clone();
        for (i, row) in self.a.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, &pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Reduced costs of `cost` over the current basis.
    fn reduced(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        for (r, &b) in self.basis.iter().enumerate() {
            let cb = cost[b];
            if cb != 0.0 {
                for (dj, &arj) in d.iter_mut().zip(&self.a[r][..self.cols]) {
                    *dj -= cb * arj;
                }
            }
        }
        d
    }

    /// Runs primal simplex on `cost` restricted to columns where `allowed` holds.
    fn optimize(&mut self, cost: &[f64], allowed: &dyn Fn(usize) -> bool) -> Result<(), AllocationError> {
        let max_iter = 50_000;
        for _ in 0..max_iter {
            let d = self.reduced(cost);
            let Some(enter) = (0..self.cols).find(|&j| allowed(j) && d[j] < -PIVOT_EPS) else {
                return Ok(());
            };
            let rhs = self.cols;
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.a.len() {
                let arc = self.a[r][enter];
                if arc > PIVOT_EPS {
                    let ratio = self.a[r][rhs] / arc;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio - PIVOT_EPS
                                || (ratio <= lratio + PIVOT_EPS && self.basis[r] < self.basis[lr])
                            {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Err(AllocationError::Unbounded);
            };
            self.pivot(r, enter);
        }
        Err(AllocationError::Infeasible)
    }
}

/// Minimizes `cost · x` over `x ≥ 0` subject to `constraints`.
pub fn minimize(cost: &[f64], constraints: &[Constraint]) -> Result<LpSolution, AllocationError> {
    let n = cost.len();
    if constraints.is_empty() {
        if cost.iter().any(|&c| c < 0.0) {
            return Err(AllocationError::Unbounded);
        }
        return Ok(LpSolution {
            x: vec![0.0; n],
            objective: 0.0,
        });
    }
    // Normalize to non-negative right-hand sides.
    let rows: Vec<(Vec<f64>, Relation, f64)> = constraints
        .iter()
        .map(|c| {
            assert_eq!(c.coeffs.len(), n, "constraint width mismatch");
            if c.rhs < 0.0 {
                let rel = match c.relation {
                    Relation::Ge => Relation::Le,
                    Relation::Le => Relation::Ge,
                    Relation::Eq => Relation::Eq,
                };
                (c.coeffs.iter().map(|v| -v).collect(), rel, -c.rhs)
            } else {
                (c.coeffs.clone(), c.relation, c.rhs)
            }
        })
        .collect();
    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let cols = n + n_slack + n_art;
    let mut a = vec![vec![0.0; cols + 1]; m];
    let mut basis = vec![0; m];
    let (mut s, mut t) = (n, n + n_slack);
    for (r, (coeffs, rel, rhs)) in rows.iter().enumerate() {
        a[r][..n].copy_from_slice(coeffs);
        a[r][cols] = *rhs;
        match rel {
            Relation::Le => {
                a[r][s] = 1.0;
                basis[r] = s;
                s += 1;
            }
            Relation::Ge => {
                a[r][s] = -1.0;
                s += 1;
                a[r][t] = 1.0;
                basis[r] = t;
                t += 1;
            }
            Relation::Eq => {
                a[r][t] = 1.0;
                basis[r] = t;
                t += 1;
            }
        }
    }
    let mut tab = Tableau { a, basis, cols };
    let art_start = n + n_slack;

    if n_art > 0 {
        let mut phase1 = vec![0.0; cols];
        for c in phase1.iter_mut().skip(art_start) {
            *c = 1.0;
        }
        tab.optimize(&phase1, &|_| true)?;
        let infeas: f64 = tab
            .basis
            .iter()
            .enumerate()
            .filter(|(_, &b)| b >= art_start)
            .map(|(r, _)| tab.a[r][cols])
            .sum();
        if infeas > FEAS_EPS {
            return Err(AllocationError::Infeasible);
        }
        // Drive remaining (zero-valued) artificials out of the basis.
        for r in 0..m {
            if tab.basis[r] >= art_start {
                if let Some(c) = (0..art_start).find(|&c| tab.a[r][c].abs() > PIVOT_EPS) {
                    tab.pivot(r, c);
                }
            }
        }
    }

    let mut phase2 = vec![0.0; cols];
    phase2[..n].copy_from_slice(cost);
    tab.optimize(&phase2, &|j| j < art_start)?;

    let mut x = vec![0.0; n];
    for (r, &b) in tab.basis.iter().enumerate() {
        if b < n {
            x[b] = tab.a[r][cols].max(0.0);
        }
    }
    let objective = x.iter().zip(cost).map(|(x, c)| x * c).sum();
    Ok(LpSolution { x, objective })
}

/// Among optimal solutions, the lexicographically smallest `x`.
///
/// After the main solve, minimizes `x_0`, then `x_1`, … in turn, each time
/// pinning the objective and the coordinates already fixed.
pub fn minimize_lexicographic(cost: &[f64], constraints: &[Constraint]) -> Result<LpSolution, AllocationError> {
    let base = minimize(cost, constraints)?;
    let n = cost.len();
    if constraints.is_empty() {
        return Ok(base);
    }
    let slack = |v: f64| v + 1e-10 * v.abs().max(1.0);
    let mut cons = constraints.to_vec();
    cons.push(Constraint {
        coeffs: cost.to_vec(),
        relation: Relation::Le,
        rhs: slack(base.objective),
    });
    let mut x = base.x.clone();
    for k in 0..n {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        let sol = minimize(&e, &cons)?;
        x = sol.x;
        cons.push(Constraint {
            coeffs: e,
            relation: Relation::Le,
            rhs: slack(x[k]),
        });
    }
    let objective = x.iter().zip(cost).map(|(x, c)| x * c).sum();
    Ok(LpSolution { x, objective })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ge(coeffs: Vec<f64>, rhs: f64) -> Constraint {
        Constraint {
            coeffs,
            relation: Relation::Ge,
            rhs,
        }
    }

    #[test]
    fn covering_lp() {
        // min x + y, x + 2y >= 2, 3x + y >= 3 → x = 0.8, y = 0.6.
        let s = minimize(&[1.0, 1.0], &[ge(vec![1.0, 2.0], 2.0), ge(vec![3.0, 1.0], 3.0)]).unwrap();
        assert!((s.x[0] - 0.8).abs() < 1e-12 && (s.x[1] - 0.6).abs() < 1e-12);
        assert!((s.objective - 1.4).abs() < 1e-12);
    }

    #[test]
    fn mixed_relations() {
        // max x + y ≡ min −x − y, x + y ≤ 4, x − y = 1, x ≤ 3.
        let s = minimize(
            &[-1.0, -1.0],
            &[
                Constraint { coeffs: vec![1.0, 1.0], relation: Relation::Le, rhs: 4.0 },
                Constraint { coeffs: vec![1.0, -1.0], relation: Relation::Eq, rhs: 1.0 },
                Constraint { coeffs: vec![1.0, 0.0], relation: Relation::Le, rhs: 3.0 },
            ],
        )
        .unwrap();
        assert!((s.objective + 4.0).abs() < 1e-12);
        assert!((s.x[0] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        assert_eq!(
            minimize(&[1.0], &[ge(vec![0.0], 1.0)]),
            Err(AllocationError::Infeasible)
        );
        assert_eq!(minimize(&[-1.0], &[ge(vec![1.0], 1.0)]), Err(AllocationError::Unbounded));
    }

    #[test]
    fn lexicographic_tie_break() {
        // min x + y subject to x + y ≥ 1: every point on the segment is optimal.
        let s = minimize_lexicographic(&[1.0, 1.0], &[ge(vec![1.0, 1.0], 1.0)]).unwrap();
        assert!(s.x[0].abs() < 1e-9 && (s.x[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_rows_do_not_cycle() {
        let rows = (0..6)
            .map(|k| ge(vec![1.0, (k as f64) * 0.0 + 1.0, 1.0], 1.0))
            .collect::<Vec<_>>();
        let s = minimize(&[1.0, 2.0, 3.0], &rows).unwrap();
        assert!((s.objective - 1.0).abs() < 1e-12);
    }
}
