use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Ar1Law, BernoulliLaw, GaussianLaw, GroupStructure, JobId, Law, ParameterPoint, PopulationModel};
use crate::error::ModelError;

/// Bernoulli success probabilities are clamped into `[EPS, 1 - EPS]` so every
/// KL number stays finite.
pub const BERNOULLI_EPS: f64 = 1e-6;

/// Independent Bernoulli jobs; job `ij` succeeds with probability `θ[c_ij]`.
///
/// Coordinates must lie in `[0, 1]`; they are clamped into
/// `[BERNOULLI_EPS, 1 - BERNOULLI_EPS]` when mapped to a law.
#[derive(Debug, Clone)]
pub struct BernoulliModel {
    groups: GroupStructure,
    coords: Vec<usize>,
    dim: usize,
}

impl BernoulliModel {
    /// One coordinate per job, in flattened job order.
    pub fn new(groups: GroupStructure) -> Self {
        let n = groups.total_jobs();
        BernoulliModel {
            groups,
            coords: (0..n).collect(),
            dim: n,
        }
    }

    /// Explicit job → coordinate map (flattened job order), allowing shared coordinates.
    pub fn with_coords(groups: GroupStructure, coords: Vec<usize>) -> Result<Self, ModelError> {
        if coords.len() != groups.total_jobs() {
            return Err(ModelError::Config(format!(
                "coordinate map has {} entries for {} jobs",
                coords.len(),
                groups.total_jobs()
            )));
        }
        let dim = coords.iter().copied().max().unwrap_or(0) + 1;
        Ok(BernoulliModel { groups, coords, dim })
    }

    pub fn success_probability(&self, job: JobId, theta: &ParameterPoint) -> f64 {
        theta.0[self.coords[self.groups.flat_index(job)]].clamp(BERNOULLI_EPS, 1.0 - BERNOULLI_EPS)
    }
}

impl PopulationModel for BernoulliModel {
    fn family(&self) -> &'static str {
        "bernoulli-iid"
    }

    fn groups(&self) -> &GroupStructure {
        &self.groups
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn law(&self, job: JobId, theta: &ParameterPoint) -> Result<Law, ModelError> {
        self.groups.check(job)?;
        self.validate_point(theta)?;
        Ok(Law::Bernoulli(BernoulliLaw::new(self.success_probability(job, theta))?))
    }

    fn validate_point(&self, theta: &ParameterPoint) -> Result<(), ModelError> {
        if theta.dim() != self.dim {
            return Err(ModelError::Config(format!(
                "bernoulli model expects θ of dimension {}, got {}",
                self.dim,
                theta.dim()
            )));
        }
        if theta.0.iter().any(|&c| !(0.0..=1.0).contains(&c)) {
            return Err(ModelError::Config(format!(
                "bernoulli coordinates must lie in [0, 1], got {theta}"
            )));
        }
        Ok(())
    }
}

/// Multi-phase project model with normal rewards.
///
/// `θ = (α_1, …, α_J, β)`; phase `i` runs at time `t_i` and job `ij` has mean
/// `α_j t_i² / (e^{t_i β} − 1)` and standard deviation `1 / (e^{t_i β} − 1)`.
#[derive(Debug, Clone)]
pub struct GaussianPhaseModel {
    groups: GroupStructure,
    jobs_per_group: usize,
    phase_times: Vec<f64>,
}

impl GaussianPhaseModel {
    pub fn new(jobs_per_group: usize, phase_times: Vec<f64>) -> Result<Self, ModelError> {
        if phase_times.is_empty() {
            return Err(ModelError::Config("at least one phase time is required".into()));
        }
        if phase_times[0] <= 0.0 || phase_times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(ModelError::Config(format!(
                "phase times must satisfy 0 < t_1 < … < t_I, got {phase_times:?}"
            )));
        }
        let groups = GroupStructure::new(vec![jobs_per_group; phase_times.len()])?;
        Ok(GaussianPhaseModel {
            groups,
            jobs_per_group,
            phase_times,
        })
    }

    pub fn phase_times(&self) -> &[f64] {
        &self.phase_times
    }

    pub fn jobs_per_group(&self) -> usize {
        self.jobs_per_group
    }

    /// `(μ_ij(θ), σ_i(θ))`.
    pub fn moments(&self, job: JobId, theta: &ParameterPoint) -> (f64, f64) {
        let t = self.phase_times[job.group - 1];
        let beta = theta.0[self.jobs_per_group];
        let alpha = theta.0[job.index - 1];
        let h = (t * beta).exp_m1();
        (alpha * t * t / h, 1.0 / h)
    }

    /// Largest mean reward among the jobs of `group` divided by `max_j α_j`;
    /// group comparisons depend on β only.
    pub fn phase_profile(&self, group: usize, beta: f64) -> f64 {
        let t = self.phase_times[group - 1];
        t * t / (t * beta).exp_m1()
    }

    fn check_theta(&self, theta: &ParameterPoint, family: &str) -> Result<(), ModelError> {
        if theta.dim() != self.jobs_per_group + 1 {
            return Err(ModelError::Config(format!(
                "{family} model expects θ = (α_1..α_{}, β), got dimension {}",
                self.jobs_per_group,
                theta.dim()
            )));
        }
        if theta.0.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
            return Err(ModelError::Config(format!(
                "{family} parameters must be positive and finite, got {theta}"
            )));
        }
        Ok(())
    }
}

impl PopulationModel for GaussianPhaseModel {
    fn family(&self) -> &'static str {
        "gaussian-iid"
    }

    fn groups(&self) -> &GroupStructure {
        &self.groups
    }

    fn dim(&self) -> usize {
        self.jobs_per_group + 1
    }

    fn law(&self, job: JobId, theta: &ParameterPoint) -> Result<Law, ModelError> {
        self.groups.check(job)?;
        self.check_theta(theta, "gaussian-iid")?;
        let (mean, sd) = self.moments(job, theta);
        Ok(Law::Gaussian(GaussianLaw::new(mean, sd)?))
    }

    fn validate_point(&self, theta: &ParameterPoint) -> Result<(), ModelError> {
        self.check_theta(theta, "gaussian-iid")
    }
}

/// The multi-phase model with AR(1) rewards: within phase `i`,
/// `X_k = a_i X_{k−1} + ε_k` and `ε_k ~ N(μ_ij(θ), σ_i(θ)²)` with the moments
/// of [`GaussianPhaseModel`]. Chains start from their stationary law.
#[derive(Debug, Clone)]
pub struct Ar1PhaseModel {
    inner: GaussianPhaseModel,
    ar_coeffs: Vec<f64>,
}

impl Ar1PhaseModel {
    pub fn new(jobs_per_group: usize, phase_times: Vec<f64>, ar_coeffs: Vec<f64>) -> Result<Self, ModelError> {
        let inner = GaussianPhaseModel::new(jobs_per_group, phase_times)?;
        if ar_coeffs.len() != inner.phase_times.len() {
            return Err(ModelError::Config(format!(
                "need one AR coefficient per phase ({}), got {}",
                inner.phase_times.len(),
                ar_coeffs.len()
            )));
        }
        if let Some(a) = ar_coeffs.iter().find(|a| !(a.abs() < 1.0)) {
            return Err(ModelError::Config(format!("AR coefficient {a} must satisfy |a| < 1")));
        }
        Ok(Ar1PhaseModel { inner, ar_coeffs })
    }

    pub fn ar_coeffs(&self) -> &[f64] {
        &self.ar_coeffs
    }

    pub fn phase_model(&self) -> &GaussianPhaseModel {
        &self.inner
    }
}

impl PopulationModel for Ar1PhaseModel {
    fn family(&self) -> &'static str {
        "ar1"
    }

    fn groups(&self) -> &GroupStructure {
        &self.inner.groups
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn law(&self, job: JobId, theta: &ParameterPoint) -> Result<Law, ModelError> {
        self.inner.groups.check(job)?;
        self.inner.check_theta(theta, "ar1")?;
        let (mean, sd) = self.inner.moments(job, theta);
        Ok(Law::Ar1(Ar1Law::new(self.ar_coeffs[job.group - 1], mean, sd)?))
    }

    fn validate_point(&self, theta: &ParameterPoint) -> Result<(), ModelError> {
        self.inner.check_theta(theta, "ar1")
    }
}

/// Serializable model description, as found in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    #[serde(rename = "bernoulli-iid", alias = "bernoulli")]
    Bernoulli {
        groups: Vec<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        coords: Option<Vec<usize>>,
    },
    #[serde(rename = "gaussian-iid", alias = "gaussian")]
    Gaussian {
        jobs_per_group: usize,
        phase_times: Vec<f64>,
    },
    #[serde(rename = "ar1")]
    Ar1 {
        jobs_per_group: usize,
        phase_times: Vec<f64>,
        ar_coeffs: Vec<f64>,
    },
}

impl ModelSpec {
    pub fn build(&self) -> Result<Arc<dyn PopulationModel>, ModelError> {
        Ok(match self {
            ModelSpec::Bernoulli { groups, coords } => {
                let g = GroupStructure::new(groups.clone())?;
                match coords {
                    Some(c) => Arc::new(BernoulliModel::with_coords(g, c.clone())?),
                    None => Arc::new(BernoulliModel::new(g)),
                }
            }
            ModelSpec::Gaussian {
                jobs_per_group,
                phase_times,
            } => Arc::new(GaussianPhaseModel::new(*jobs_per_group, phase_times.clone())?),
            ModelSpec::Ar1 {
                jobs_per_group,
                phase_times,
                ar_coeffs,
            } => Arc::new(Ar1PhaseModel::new(*jobs_per_group, phase_times.clone(), ar_coeffs.clone())?),
        })
    }
}
