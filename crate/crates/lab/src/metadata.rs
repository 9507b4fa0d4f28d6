//! Run metadata written next to every output.

use std::path::Path;
use std::process::Command;

use anyhow::{Context, Result};
use contract_zoom::baselines::{THOMPSON_PRIOR_MEAN, THOMPSON_PRIOR_VAR};
use contract_zoom::mesh::DEFAULT_DEPTH_CAP;
use contract_zoom::Scalar;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::experiment::ExperimentConfig;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Constants {
    pub tie_band: f64,
    pub c_select: f64,
    pub c_zoom: f64,
    pub confidence_rules: &'static str,
    pub depth_cap: u32,
    pub thompson_prior_mean: f64,
    pub thompson_prior_var: f64,
    pub thompson_noise_var: f64,
    pub checkpoint_schedule: &'static str,
    pub opt_grid_step_full_space: f64,
    pub census_grid_depth_offset: u32,
    pub two_type_weights: [f64; 2],
}

impl Default for Constants {
    fn default() -> Self {
        Self {
            tie_band: <f64 as Scalar>::tie_band(),
            c_select: 1.0,
            c_zoom: 0.6,
            confidence_rules: "constant mode: index bonus c_select/sqrt(n) for every cell, zoom once W > c_zoom/sqrt(n)",
            depth_cap: DEFAULT_DEPTH_CAP,
            thompson_prior_mean: THOMPSON_PRIOR_MEAN,
            thompson_prior_var: THOMPSON_PRIOR_VAR,
            thompson_noise_var: 1.0,
            checkpoint_schedule: "powers of 10 and their doublings, plus T",
            opt_grid_step_full_space: crate::commands::FULL_SPACE_OPT_STEP,
            census_grid_depth_offset: 2,
            two_type_weights: [0.5, 0.5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Seeds {
    pub base_seed: u64,
    pub runs: usize,
    pub derivation: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub command: String,
    pub git_hash: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub seeds: Seeds,
    pub constants: Constants,
}

/// Current commit, or `unknown` outside a repository.
pub fn git_hash() -> String {
    Command::new("git")
        .args(["rev-parse", "HEAD"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Metadata {
    pub fn collect(cfg: &ExperimentConfig, command: &str) -> Self {
        Self {
            command: command.into(),
            git_hash: git_hash(),
            config_hash: sha256_hex(cfg.canonical_json().as_bytes()),
            config: cfg.clone(),
            seeds: Seeds {
                base_seed: cfg.base_seed,
                runs: cfg.runs,
                derivation: "ChaCha8 seeded with base_seed; run k plays on stream 2k and draws its market on stream 2k+1",
            },
            constants: Constants::default(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join("metadata.json");
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }
}
