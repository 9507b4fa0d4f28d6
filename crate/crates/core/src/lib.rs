//! Dynamic contract design as a multi-armed bandit.
//!
//! A requester posts a contract (payments per outcome) each round; a random
//! worker best-responds with a hidden effort level and an outcome is observed.
//! [`zooming`] adaptively refines a dyadic partition of the contract space,
//! [`baselines`] run finite-armed bandits over a fixed mesh, and [`analysis`]
//! evaluates both against exact oracles.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix it to `f64`.

pub mod analysis;
pub mod baselines;
pub mod config;
pub mod curve;
pub mod envs;
pub mod error;
pub mod mesh;
pub mod model;
pub mod record;
pub mod scalar;
pub mod zooming;

pub use error::{Error, Result, TypeViolation};
pub use scalar::Scalar;

pub use baselines::{nonadaptive_run, BanditPolicy};
pub use envs::Environment;
pub use mesh::{Anchors, Cell, CellCount, UniformMesh};
pub use zooming::{RunOptions, WidthEstimator};

pub type OutcomeSpace = model::OutcomeSpace<f64>;
pub type Contract = model::Contract<f64>;
pub type WorkerType = model::WorkerType<f64>;
pub type UtilityBreakdown = model::UtilityBreakdown<f64>;
pub type PiecewiseLinear = curve::PiecewiseLinear<f64>;
pub type Market = envs::Market<f64>;
pub type SupplyModel = envs::SupplyModel<f64>;
pub type Observation = envs::Observation<f64>;
pub type CandidateSet = mesh::CandidateSet<f64>;
pub type ZoomConfig = zooming::ZoomConfig<f64>;
pub type Zooming = zooming::Zooming<f64>;
pub type RunRecord = record::RunRecord<f64>;
