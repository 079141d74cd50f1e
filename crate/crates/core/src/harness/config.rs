//! JSON experiment configuration.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, ModelError};
use crate::information::{Instance, Tolerances};
use crate::par::Execution;
use crate::populations::{JobId, ModelSpec, ParameterPoint, ParameterSpace};
use crate::strategy::{PolicyKind, StrategyConfig};

/// The parameter space: an explicit point list or a grid over a box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
    #[serde(default, rename = "box", skip_serializing_if = "Option::is_none")]
    pub grid: Option<BoxSpec>,
    /// Fixed neighbourhood diameter for the adjusted estimate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub resolution: Vec<usize>,
}

impl SpaceSpec {
    pub fn build(&self) -> Result<ParameterSpace, ModelError> {
        let space = match (&self.points, &self.grid) {
            (Some(p), None) => ParameterSpace::finite(p.iter().cloned().map(ParameterPoint::new).collect())?,
            (None, Some(b)) => ParameterSpace::grid(b.lower.clone(), b.upper.clone(), b.resolution.clone())?,
            _ => {
                return Err(ModelError::Config(
                    "space needs exactly one of `points` or `box`".into(),
                ))
            }
        };
        match self.delta {
            Some(d) => space.with_neighborhood_radius(d),
            None => Ok(space),
        }
    }
}

/// A parameter value named either by its index in the space or by its coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PointRef {
    Index(usize),
    Coords(Vec<f64>),
}

impl PointRef {
    pub fn resolve(&self, space: &ParameterSpace) -> Result<usize, ModelError> {
        match self {
            PointRef::Index(i) if *i < space.len() => Ok(*i),
            PointRef::Index(i) => Err(ModelError::Config(format!(
                "parameter index {i} is out of range for a space of {} points",
                space.len()
            ))),
            PointRef::Coords(c) => space.require(&ParameterPoint::new(c.clone())),
        }
    }
}

/// Settings of the Wald diagnostic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaldSpec {
    pub job: JobId,
    pub theta0: PointRef,
    pub theta_q: PointRef,
    pub thresholds: Vec<f64>,
    pub replications: usize,
    #[serde(default = "default_max_steps")]
    pub max_steps: u64,
}

fn default_max_steps() -> u64 {
    10_000_000
}

/// A geometric horizon grid for the `sweep` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub from: u64,
    pub to: u64,
    pub points: usize,
}

impl SweepSpec {
    pub fn horizons(&self) -> Result<Vec<u64>, ModelError> {
        if self.from == 0 || self.to < self.from || self.points == 0 {
            return Err(ModelError::Config(format!(
                "sweep needs 0 < from <= to and points >= 1, got {self:?}"
            )));
        }
        if self.points == 1 {
            return Ok(vec![self.from]);
        }
        let (a, b) = ((self.from as f64).ln(), (self.to as f64).ln());
        let mut out: Vec<u64> = (0..self.points)
            .map(|k| (a + (b - a) * k as f64 / (self.points - 1) as f64).exp().round() as u64)
            .collect();
        out.dedup();
        Ok(out)
    }
}

fn default_replications() -> usize {
    100
}

fn default_policies() -> Vec<PolicyKind> {
    vec![PolicyKind::PhiStar]
}

/// Top-level experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub space: SpaceSpec,
    #[serde(default)]
    pub truth: Vec<PointRef>,
    #[serde(default)]
    pub horizons: Vec<u64>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_policies")]
    pub policies: Vec<PolicyKind>,
    #[serde(default)]
    pub strategy: StrategyConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub execution: Execution,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wald: Option<WaldSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, HarnessError> {
        if !path.is_file() {
            return Err(HarnessError::ConfigNotFound(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Builds the model and space and resolves the true parameters.
    pub fn build(&self) -> Result<Experiment, HarnessError> {
        let model = self.model.build()?;
        let space = self.space.build()?;
        let inst = Arc::new(Instance::new(model, space, self.tolerances)?);
        let truth = self
            .truth
            .iter()
            .map(|t| t.resolve(inst.space()))
            .collect::<Result<Vec<_>, _>>()?;
        self.strategy.prior.validate(inst.len())?;
        Ok(Experiment {
            config: self.clone(),
            instance: inst,
            truth,
        })
    }

    /// Checks the fields needed to run simulations.
    pub fn validate_simulation(&self, horizons: &[u64]) -> Result<(), HarnessError> {
        if horizons.is_empty() {
            return Err(HarnessError::Config("at least one horizon is required".into()));
        }
        if horizons[0] == 0 || horizons.windows(2).any(|w| w[0] >= w[1]) {
            return Err(HarnessError::Config(format!(
                "horizons must be positive and strictly increasing, got {horizons:?}"
            )));
        }
        if self.replications == 0 {
            return Err(HarnessError::Config("replications must be at least 1".into()));
        }
        if self.truth.is_empty() {
            return Err(HarnessError::Config("simulation needs at least one true parameter".into()));
        }
        if self.policies.is_empty() {
            return Err(HarnessError::Config("at least one policy is required".into()));
        }
        Ok(())
    }
}

/// A validated configuration with its instance built.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub instance: Arc<Instance>,
    /// Space indices of the true parameters.
    pub truth: Vec<usize>,
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_POINT: &str = r#"{
        "model": {"family": "bernoulli-iid", "groups": [2]},
        "space": {"points": [[0.2, 0.1], [0.2, 0.3]]},
        "truth": [0, [0.2, 0.3]],
        "horizons": [100, 1000],
        "replications": 3,
        "policies": ["phi-star", "oracle"],
        "seed": 7
    }"#;

    #[test]
    fn parses_and_builds() {
        let cfg = ExperimentConfig::from_json(TWO_POINT).unwrap();
        let exp = cfg.build().unwrap();
        assert_eq!(exp.truth, vec![0, 1]);
        assert!(cfg.validate_simulation(&cfg.horizons).is_ok());
    }

    #[test]
    fn rejects_bad_fields() {
        assert!(ExperimentConfig::from_json(&TWO_POINT.replace("\"seed\"", "\"sede\"")).is_err());
        let cfg = ExperimentConfig::from_json(&TWO_POINT.replace("[100, 1000]", "[1000, 100]")).unwrap();
        assert!(cfg.validate_simulation(&cfg.horizons).is_err());
        let cfg = ExperimentConfig::from_json(&TWO_POINT.replace("[0, [0.2, 0.3]]", "[0, [0.2, 0.35]]")).unwrap();
        assert!(matches!(cfg.build(), Err(HarnessError::Model(_))));
        let err = ExperimentConfig::from_path(Path::new("/nonexistent/cfg.json")).unwrap_err();
        assert_eq!(err.to_string(), "config not found: /nonexistent/cfg.json");
    }

    #[test]
    fn sweep_grid_is_geometric() {
        let s = SweepSpec {
            from: 100,
            to: 100_000,
            points: 4,
        };
        assert_eq!(s.horizons().unwrap(), vec![100, 1000, 10_000, 100_000]);
    }
}
