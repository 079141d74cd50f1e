//! Precedence-constrained multi-armed bandits with Markovian rewards.
//!
//! Jobs are arranged in precedence-ordered groups: once sampling moves to a
//! later group it can never return to an earlier one. Each job is a Markov
//! chain whose law depends on an unknown parameter θ drawn from a finite
//! space. The crate provides
//!
//! * [`populations`]: reward families (iid Bernoulli, iid Gaussian phase
//!   models, AR(1) phase models, custom laws) with sampling and log-densities;
//! * [`information`]: KL information numbers, the partition of Θ by optimal
//!   group, optimal-job sets and bad sets;
//! * [`allocation`]: the linear program giving the asymptotic regret constant
//!   `z(θ, ℓ)` and per-job experimentation levels;
//! * [`strategy`]: the staged estimation / experimentation / testing policy
//!   and baseline policies;
//! * [`harness`]: trials, Monte Carlo experiments, the Wald diagnostic and
//!   result persistence.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocation;
pub mod error;
pub mod harness;
pub mod information;
pub mod par;
pub mod populations;
pub mod quadrature;
pub mod rng;
pub mod strategy;

pub use error::{AllocationError, HarnessError, ModelError};
pub use information::{Classification, Instance, Tolerances};
pub use par::Execution;
pub use populations::{GroupStructure, JobId, ParameterPoint, ParameterSpace, PopulationModel};
