//! Experiment runner for the contract-design bandits: seeded multi-run
//! execution, CSV and JSON outputs, and the `verify` property suites.

pub mod commands;
pub mod experiment;
pub mod metadata;
pub mod suites;

pub use experiment::{AlgorithmSpec, ExperimentConfig};
pub use suites::{SuiteVerdict, VerifyOptions};
