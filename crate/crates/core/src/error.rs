use std::path::PathBuf;

use thiserror::Error;

/// Errors raised while building models, spaces and experiment configurations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("job {group}.{index} is not part of the group structure {sizes:?}")]
    UnknownJob {
        group: usize,
        index: usize,
        sizes: Vec<usize>,
    },
    #[error("parameter point {0} is not a member of the parameter space")]
    NotInSpace(String),
    #[error("state {state} is outside the support of the {family} law")]
    Domain { family: &'static str, state: f64 },
    #[error("{0}")]
    Precondition(String),
}

/// Errors raised by the lower-bound LP.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum AllocationError {
    /// A constraint row has no positive coefficient, so no allocation can
    /// satisfy it. This certifies that the positive-information assumption
    /// fails for the supplied parameter space.
    #[error(
        "assumption violation: constraint row {row} indexed by parameter #{theta_prime} has no informative job"
    )]
    AssumptionViolation { row: usize, theta_prime: usize },
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("invalid relaxation vector: {0}")]
    InvalidLambda(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Top-level error for harness operations (config ingestion, simulation, I/O).
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config not found: {}", .0.display())]
    ConfigNotFound(PathBuf),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Allocation(#[from] AllocationError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization failed: {0}")]
    Serialization(String),
    #[error("trial failed: {0}")]
    Trial(String),
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the user's configuration rather than a runtime fault.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            HarnessError::ConfigNotFound(_)
                | HarnessError::Config(_)
                | HarnessError::Model(_)
                | HarnessError::Allocation(AllocationError::AssumptionViolation { .. })
        )
    }
}
