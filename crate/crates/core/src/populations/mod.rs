//! Reward populations: jobs arranged in precedence-ordered groups, parameter
//! points and spaces, and the per-job Markov chain laws a parameter induces.
//!
//! A [`PopulationModel`] maps `(job, θ)` to a [`Law`]. Laws carry everything
//! the rest of the crate needs: sampling, initial and transition
//! log-densities, and the stationary mean reward (the reward is the observed
//! state itself).

mod families;
mod law;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

pub use families::{Ar1PhaseModel, BernoulliModel, GaussianPhaseModel, ModelSpec, BERNOULLI_EPS};
pub use law::{ar1_kl, bernoulli_kl, gaussian_kl, Ar1Law, BernoulliLaw, CustomLaw, GaussianLaw, Law, Support};

/// An observed state of a job's chain. Rewards are the states themselves.
pub type State = f64;

/// A job identified by its 1-based group and 1-based index within the group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct JobId {
    pub group: usize,
    pub index: usize,
}

impl JobId {
    pub const fn new(group: usize, index: usize) -> Self {
        JobId { group, index }
    }

    /// The precedence relation: `self ⪯ other` iff `self.group <= other.group`.
    pub fn precedes(&self, other: &JobId) -> bool {
        self.group <= other.group
    }
}

impl fmt::Display for JobId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.group, self.index)
    }
}

/// Sizes `(J_1, …, J_I)` of the precedence-ordered job groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct GroupStructure {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
}

impl GroupStructure {
    pub fn new(sizes: Vec<usize>) -> Result<Self, ModelError> {
        if sizes.is_empty() {
            return Err(ModelError::Config("at least one job group is required".into()));
        }
        if sizes.contains(&0) {
            return Err(ModelError::Config(format!(
                "every job group needs at least one job, got {sizes:?}"
            )));
        }
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut acc = 0;
        for &s in &sizes {
            offsets.push(acc);
            acc += s;
        }
        Ok(GroupStructure { sizes, offsets })
    }

    pub fn num_groups(&self) -> usize {
        self.sizes.len()
    }

    /// `J_i` for a 1-based group index.
    pub fn group_size(&self, group: usize) -> usize {
        self.sizes[group - 1]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn total_jobs(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn contains(&self, job: JobId) -> bool {
        job.group >= 1
            && job.group <= self.sizes.len()
            && job.index >= 1
            && job.index <= self.sizes[job.group - 1]
    }

    pub fn check(&self, job: JobId) -> Result<(), ModelError> {
        if self.contains(job) {
            Ok(())
        } else {
            Err(ModelError::UnknownJob {
                group: job.group,
                index: job.index,
                sizes: self.sizes.clone(),
            })
        }
    }

    /// Position of `job` in the flattened job order `11, 12, …, IJ_I`.
    pub fn flat_index(&self, job: JobId) -> usize {
        debug_assert!(self.contains(job));
        self.offsets[job.group - 1] + job.index - 1
    }

    pub fn job_at(&self, flat: usize) -> JobId {
        let group = self.offsets.partition_point(|&o| o <= flat);
        JobId::new(group, flat - self.offsets[group - 1] + 1)
    }

    /// All jobs in flattened order.
    pub fn jobs(&self) -> impl Iterator<Item = JobId> + '_ {
        self.sizes
            .iter()
            .enumerate()
            .flat_map(|(g, &s)| (1..=s).map(move |j| JobId::new(g + 1, j)))
    }

    pub fn group_jobs(&self, group: usize) -> impl Iterator<Item = JobId> {
        (1..=self.sizes[group - 1]).map(move |j| JobId::new(group, j))
    }
}

impl TryFrom<Vec<usize>> for GroupStructure {
    type Error = ModelError;
    fn try_from(sizes: Vec<usize>) -> Result<Self, Self::Error> {
        GroupStructure::new(sizes)
    }
}

impl From<GroupStructure> for Vec<usize> {
    fn from(g: GroupStructure) -> Self {
        g.sizes
    }
}

/// A parameter value θ ∈ R^d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterPoint(pub Vec<f64>);

impl ParameterPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        ParameterPoint(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn distance(&self, other: &ParameterPoint) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

impl fmt::Display for ParameterPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, c) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl From<Vec<f64>> for ParameterPoint {
    fn from(v: Vec<f64>) -> Self {
        ParameterPoint(v)
    }
}

/// How a finite parameter space was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "origin")]
pub enum SpaceOrigin {
    NativeFinite,
    GridOfBox {
        lower: Vec<f64>,
        upper: Vec<f64>,
        resolution: Vec<usize>,
    },
}

/// A finite, ordered enumeration of Θ. The order is used for every
/// deterministic tie-break in the crate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpace {
    points: Vec<ParameterPoint>,
    origin: SpaceOrigin,
    /// Neighbourhood radius δ for the adjusted MLE; `None` uses the schedule default.
    neighborhood_radius: Option<f64>,
}

impl ParameterSpace {
    pub fn finite(points: Vec<ParameterPoint>) -> Result<Self, ModelError> {
        if points.is_empty() {
            return Err(ModelError::Config("parameter space is empty".into()));
        }
        let d = points[0].dim();
        if d == 0 {
            return Err(ModelError::Config("parameter points need at least one coordinate".into()));
        }
        for (k, p) in points.iter().enumerate() {
            if p.dim() != d {
                return Err(ModelError::Config(format!(
                    "point #{k} has dimension {} but the space has dimension {d}",
                    p.dim()
                )));
            }
            if p.0.iter().any(|c| !c.is_finite()) {
                return Err(ModelError::Config(format!("point #{k} has a non-finite coordinate")));
            }
            if points[..k].iter().any(|q| q == p) {
                return Err(ModelError::Config(format!("point #{k} {p} is duplicated")));
            }
        }
        Ok(ParameterSpace {
            points,
            origin: SpaceOrigin::NativeFinite,
            neighborhood_radius: None,
        })
    }

    /// Cartesian grid over a box; coordinate 0 varies slowest.
    pub fn grid(lower: Vec<f64>, upper: Vec<f64>, resolution: Vec<usize>) -> Result<Self, ModelError> {
        if lower.len() != upper.len() || lower.len() != resolution.len() || lower.is_empty() {
            return Err(ModelError::Config("box bounds and resolution must have equal, positive length".into()));
        }
        for k in 0..lower.len() {
            if !(lower[k] <= upper[k]) || resolution[k] == 0 {
                return Err(ModelError::Config(format!("invalid box along coordinate {k}")));
            }
            if resolution[k] == 1 && lower[k] != upper[k] {
                return Err(ModelError::Config(format!(
                    "resolution 1 along coordinate {k} requires lower == upper"
                )));
            }
        }
        let axes: Vec<Vec<f64>> = (0..lower.len())
            .map(|k| {
                let n = resolution[k];
                if n == 1 {
                    vec![lower[k]]
                } else {
                    (0..n)
                        .map(|s| {
                            if s + 1 == n {
                                upper[k]
                            } else {
                                lower[k] + (upper[k] - lower[k]) * s as f64 / (n - 1) as f64
                            }
                        })
                        .collect()
                }
            })
            .collect();
        let mut points = vec![Vec::new()];
        for axis in &axes {
            points = points
                .into_iter()
                .flat_map(|prefix| {
                    axis.iter().map(move |&v| {
                        let mut p = prefix.clone();
                        p.push(v);
                        p
                    })
                })
                .collect();
        }
        let mut space = ParameterSpace::finite(points.into_iter().map(ParameterPoint).collect())?;
        space.origin = SpaceOrigin::GridOfBox { lower, upper, resolution };
        Ok(space)
    }

    pub fn with_neighborhood_radius(mut self, delta: f64) -> Result<Self, ModelError> {
        if !(delta > 0.0) {
            return Err(ModelError::Config("neighborhood radius must be positive".into()));
        }
        self.neighborhood_radius = Some(delta);
        Ok(self)
    }

    pub fn neighborhood_radius(&self) -> Option<f64> {
        self.neighborhood_radius
    }

    pub fn points(&self) -> &[ParameterPoint] {
        &self.points
    }

    pub fn point(&self, idx: usize) -> &ParameterPoint {
        &self.points[idx]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    pub fn origin(&self) -> &SpaceOrigin {
        &self.origin
    }

    pub fn index_of(&self, p: &ParameterPoint) -> Option<usize> {
        self.points.iter().position(|q| q == p)
    }

    pub fn require(&self, p: &ParameterPoint) -> Result<usize, ModelError> {
        self.index_of(p).ok_or_else(|| ModelError::NotInSpace(p.to_string()))
    }
}

/// A family of per-job chain laws indexed by θ.
///
/// Implementations must be immutable after construction; they are shared
/// across concurrent trials.
pub trait PopulationModel: Send + Sync + fmt::Debug {
    fn family(&self) -> &'static str;

    fn groups(&self) -> &GroupStructure;

    /// Dimension of θ expected by this model.
    fn dim(&self) -> usize;

    /// The chain law of `job` under `theta`.
    fn law(&self, job: JobId, theta: &ParameterPoint) -> Result<Law, ModelError>;

    /// Checks that `theta` is admissible for the model (dimension, bounds).
    fn validate_point(&self, theta: &ParameterPoint) -> Result<(), ModelError> {
        if theta.dim() != self.dim() {
            return Err(ModelError::Config(format!(
                "{} model expects θ of dimension {}, got {}",
                self.family(),
                self.dim(),
                theta.dim()
            )));
        }
        Ok(())
    }
}

/// Draws `x_0 ~ ν_ij(·; θ)`.
pub fn initial_sample<R: rand::RngCore>(
    model: &dyn PopulationModel,
    job: JobId,
    theta: &ParameterPoint,
    rng: &mut R,
) -> Result<State, ModelError> {
    Ok(model.law(job, theta)?.sample_initial(rng))
}

/// Draws `y ~ p_ij(x, ·; θ)`.
pub fn sample_transition<R: rand::RngCore>(
    model: &dyn PopulationModel,
    job: JobId,
    theta: &ParameterPoint,
    x: State,
    rng: &mut R,
) -> Result<State, ModelError> {
    Ok(model.law(job, theta)?.sample_transition(x, rng))
}

/// `log p_ij(x, y; θ)`, with a domain error for `y` outside the support.
pub fn log_transition_density(
    model: &dyn PopulationModel,
    job: JobId,
    theta: &ParameterPoint,
    x: State,
    y: State,
) -> Result<f64, ModelError> {
    model.law(job, theta)?.log_transition_density(x, y)
}

/// `μ_ij(θ)`, the stationary mean reward.
pub fn stationary_mean(
    model: &dyn PopulationModel,
    job: JobId,
    theta: &ParameterPoint,
) -> Result<f64, ModelError> {
    Ok(model.law(job, theta)?.stationary_mean())
}
