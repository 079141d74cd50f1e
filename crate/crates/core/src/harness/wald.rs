//! Wald's-equation diagnostic for additive log-likelihood-ratio functionals.
//!
//! Under θ0 a job's chain starts from its initial law and the increments
//! `ξ_k = log p(X_{k−1}, X_k; θ0) − log p(X_{k−1}, X_k; θ_q)` are summed until
//! `S_n ≥ c`. Wald's equation predicts `E S_τ ≈ μ E τ` with `μ = I(θ0, θ_q)`.

use serde::{Deserialize, Serialize};

use crate::error::HarnessError;
use crate::information::Instance;
use crate::par::{self, Execution};
use crate::populations::JobId;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaldReport {
    pub job: JobId,
    pub theta0: usize,
    pub theta_q: usize,
    pub threshold: f64,
    pub replications: usize,
    /// Replications that did not cross within the step cap (excluded from the means).
    pub censored: usize,
    pub kl: f64,
    pub mean_stopped_sum: f64,
    pub mean_stopping_time: f64,
    /// `E S_τ / (μ E τ)`.
    pub ratio: f64,
    pub ratio_se: f64,
    pub ratio_ci95: (f64, f64),
}

/// Simulates `replications` stopped random walks and reports the Wald ratio.
#[allow(clippy::too_many_arguments)]
pub fn wald_diagnostic(
    inst: &Instance,
    job: JobId,
    theta0: usize,
    theta_q: usize,
    threshold: f64,
    replications: usize,
    seed: u64,
    max_steps: u64,
    exec: Execution,
) -> Result<WaldReport, HarnessError> {
    inst.groups().check(job)?;
    if replications < 2 {
        return Err(HarnessError::Config("the Wald diagnostic needs at least 2 replications".into()));
    }
    let kl = inst.kl(job, theta0, theta_q);
    if !(kl > inst.tolerances().kl_zero) {
        return Err(HarnessError::Config(format!(
            "job {job} carries no information between #{theta0} and #{theta_q}"
        )));
    }
    let p = inst.law(theta0, job).clone();
    let q = inst.law(theta_q, job).clone();
    let runs: Vec<Option<(f64, f64)>> = par::map_indexed(exec, replications, |rep| {
        let mut rng = rng::stream(rng::derive_seed(seed, &[rep as u64]), 0);
        let mut x = p.sample_initial(&mut rng);
        let mut s = 0.0;
        for n in 1..=max_steps {
            let y = p.sample_transition(x, &mut rng);
            s += p.log_step(x, y) - q.log_step(x, y);
            x = y;
            if s >= threshold {
                return Some((s, n as f64));
            }
        }
        None
    });
    let done: Vec<(f64, f64)> = runs.iter().flatten().copied().collect();
    let censored = replications - done.len();
    let m = done.len() as f64;
    if done.len() < 2 {
        return Err(HarnessError::Trial(format!(
            "threshold {threshold} was crossed in only {} of {replications} replications",
            done.len()
        )));
    }
    let ma = done.iter().map(|d| d.0).sum::<f64>() / m;
    let mb = done.iter().map(|d| d.1).sum::<f64>() / m;
    let va = done.iter().map(|d| (d.0 - ma).powi(2)).sum::<f64>() / (m - 1.0);
    let vb = done.iter().map(|d| (d.1 - mb).powi(2)).sum::<f64>() / (m - 1.0);
    let cab = done.iter().map(|d| (d.0 - ma) * (d.1 - mb)).sum::<f64>() / (m - 1.0);
    let ratio = ma / (kl * mb);
    // Delta method for a / (μ b).
    let ga = 1.0 / (kl * mb);
    let gb = -ma / (kl * mb * mb);
    let ratio_se = ((ga * ga * va + 2.0 * ga * gb * cab + gb * gb * vb) / m).max(0.0).sqrt();
    let h = 1.959_963_984_540_054 * ratio_se;
    Ok(WaldReport {
        job,
        theta0,
        theta_q,
        threshold,
        replications,
        censored,
        kl,
        mean_stopped_sum: ma,
        mean_stopping_time: mb,
        ratio,
        ratio_se,
        ratio_ci95: (ratio - h, ratio + h),
    })
}
