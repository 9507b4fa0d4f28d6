//! Experiment configuration and the seeded multi-run executor.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use contract_zoom::baselines::{nonadaptive_run_with_rng, BanditPolicy};
use contract_zoom::config::EnvSpec;
use contract_zoom::envs::Market;
use contract_zoom::mesh::CandidateSet;
use contract_zoom::zooming::{self, ConfidenceMode, RunOptions, WidthEstimator, ZoomConfig};
use contract_zoom::RunRecord;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

fn one() -> f64 {
    1.0
}

fn c_zoom_default() -> f64 {
    0.6
}

fn c_rad_default() -> f64 {
    16.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ConfidenceSpec {
    Constant {
        #[serde(default = "one")]
        c_select: f64,
        #[serde(default = "c_zoom_default")]
        c_zoom: f64,
    },
    /// Literal radius `c/√n` with the factor 5 of the theoretical rules.
    ConstantRadius {
        #[serde(default = "one")]
        c_select: f64,
        #[serde(default = "c_zoom_default")]
        c_zoom: f64,
    },
    Theoretical {
        #[serde(default = "c_rad_default")]
        c_rad: f64,
    },
}

impl Default for ConfidenceSpec {
    fn default() -> Self {
        ConfidenceSpec::Constant { c_select: 1.0, c_zoom: 0.6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidatesSpec {
    /// The uniform mesh of each configured `δ`.
    #[default]
    Mesh,
    /// All bounded contracts; `δ` is ignored.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum AlgorithmSpec {
    Zooming {
        #[serde(default)]
        confidence: ConfidenceSpec,
        #[serde(default)]
        candidates: CandidatesSpec,
        #[serde(default)]
        clamp_width: bool,
    },
    Ucb1,
    Ucb1Constant {
        #[serde(default = "one")]
        c: f64,
    },
    Thompson,
}

impl AlgorithmSpec {
    pub fn zooming() -> Self {
        AlgorithmSpec::Zooming {
            confidence: ConfidenceSpec::default(),
            candidates: CandidatesSpec::Mesh,
            clamp_width: false,
        }
    }

    /// Short name used in CSV rows and file names.
    pub fn label(&self) -> String {
        match self {
            AlgorithmSpec::Zooming { confidence, candidates, clamp_width } => {
                let mut s = String::from("zooming");
                match confidence {
                    ConfidenceSpec::Theoretical { .. } => s.push_str("_theory"),
                    ConfidenceSpec::ConstantRadius { .. } => s.push_str("_radius"),
                    ConfidenceSpec::Constant { .. } => {}
                }
                if *candidates == CandidatesSpec::Full {
                    s.push_str("_full");
                }
                if *clamp_width {
                    s.push_str("_clamped");
                }
                s
            }
            AlgorithmSpec::Ucb1 => "ucb1".into(),
            AlgorithmSpec::Ucb1Constant { .. } => "ucb1_const".into(),
            AlgorithmSpec::Thompson => "thompson".into(),
        }
    }

    fn policy(&self) -> Option<BanditPolicy> {
        match self {
            AlgorithmSpec::Zooming { .. } => None,
            AlgorithmSpec::Ucb1 => Some(BanditPolicy::Ucb1),
            AlgorithmSpec::Ucb1Constant { c } => Some(BanditPolicy::Ucb1Constant(*c)),
            AlgorithmSpec::Thompson => Some(BanditPolicy::ThompsonGaussian),
        }
    }
}

fn default_algorithms() -> Vec<AlgorithmSpec> {
    vec![AlgorithmSpec::zooming(), AlgorithmSpec::Ucb1Constant { c: 1.0 }, AlgorithmSpec::Thompson]
}
fn default_deltas() -> Vec<f64> {
    vec![0.02, 0.08, 0.2]
}
fn default_horizons() -> Vec<u64> {
    vec![5000]
}
fn default_runs() -> usize {
    50
}
fn default_limit_horizon() -> u64 {
    50_000
}
fn default_window() -> f64 {
    0.1
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusSpec {
    #[serde(default = "census_depth")]
    pub max_depth: u32,
    #[serde(default)]
    pub eps_list: Option<Vec<f64>>,
    #[serde(default = "one")]
    pub beta: f64,
    /// Mesh granularity; the full space when absent.
    #[serde(default)]
    pub delta: Option<f64>,
}

fn census_depth() -> u32 {
    8
}

impl Default for CensusSpec {
    fn default() -> Self {
        Self { max_depth: census_depth(), eps_list: None, beta: 1.0, delta: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<AlgorithmSpec>,
    #[serde(default = "default_deltas")]
    pub deltas: Vec<f64>,
    #[serde(default = "default_horizons")]
    pub horizons: Vec<u64>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Check the zooming invariants after every round.
    #[serde(default)]
    pub debug_asserts: bool,
    /// Write per-round logs (the `run` command always does).
    #[serde(default)]
    pub log_rounds: bool,
    /// Checkpoints for `over-time`; powers of ten and their doublings when absent.
    #[serde(default)]
    pub checkpoints: Option<Vec<u64>>,
    #[serde(default = "default_limit_horizon")]
    pub limit_horizon: u64,
    /// Trailing fraction of rounds averaged by `limit-opt`.
    #[serde(default = "default_window")]
    pub limit_window: f64,
    #[serde(default)]
    pub census: CensusSpec,
}

impl ExperimentConfig {
    pub fn new(env: EnvSpec) -> Self {
        Self {
            env,
            algorithms: default_algorithms(),
            deltas: default_deltas(),
            horizons: default_horizons(),
            runs: default_runs(),
            base_seed: 0,
            output_dir: default_output(),
            debug_asserts: false,
            log_rounds: false,
            checkpoints: None,
            limit_horizon: default_limit_horizon(),
            limit_window: default_window(),
            census: CensusSpec::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).context("parsing experiment config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            bail!("run count must be at least 1");
        }
        if let Some(d) = self.deltas.iter().find(|d| !(**d > 0.0 && **d <= 1.0)) {
            bail!("δ = {d} outside (0, 1]");
        }
        if self.horizons.contains(&0) || self.limit_horizon == 0 {
            bail!("horizons must be positive");
        }
        if !(self.limit_window > 0.0 && self.limit_window <= 1.0) {
            bail!("limit window {} outside (0, 1]", self.limit_window);
        }
        if self.algorithms.is_empty() {
            bail!("no algorithms configured");
        }
        Ok(())
    }

    /// Canonical JSON used for hashing.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serialises")
    }
}

/// Powers of ten and their doublings up to `horizon`, plus `horizon` itself.
pub fn default_checkpoints(horizon: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut p = 10u64;
    while p <= horizon {
        out.push(p);
        if 2 * p <= horizon {
            out.push(2 * p);
        }
        p = p.saturating_mul(10);
    }
    if out.last() != Some(&horizon) {
        out.push(horizon);
    }
    out
}

/// Rng of run `k`: stream `2k` of the base seed drives the algorithm and the
/// environment, stream `2k + 1` draws the run's market parameters.
pub fn run_rng(base_seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(2 * k);
    rng
}

pub fn market_rng(base_seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(2 * k + 1);
    rng
}

pub fn build_market(env: &EnvSpec, base_seed: u64, k: u64) -> Result<Market<f64>> {
    Ok(env.build(&mut market_rng(base_seed, k))?)
}

pub fn candidate_set(alg: &AlgorithmSpec, m: usize, delta: f64) -> Result<CandidateSet<f64>> {
    Ok(match alg {
        AlgorithmSpec::Zooming { candidates: CandidatesSpec::Full, .. } => CandidateSet::full_space(m),
        _ => CandidateSet::uniform_mesh(m, delta)?,
    })
}

pub fn zoom_config(alg: &AlgorithmSpec, market: &Market<f64>, horizon: u64, checks: bool) -> Option<ZoomConfig<f64>> {
    let AlgorithmSpec::Zooming { confidence, clamp_width, .. } = alg else {
        return None;
    };
    let mode = match *confidence {
        ConfidenceSpec::Constant { c_select, c_zoom } => ConfidenceMode::Constant { c_select, c_zoom },
        ConfidenceSpec::ConstantRadius { c_select, c_zoom } => ConfidenceMode::ConstantRadius { c_select, c_zoom },
        ConfidenceSpec::Theoretical { c_rad } => ConfidenceMode::Theoretical { c_rad, horizon },
    };
    let width = if market.is_inventory() { WidthEstimator::InventoryTwoOutcome } else { WidthEstimator::General };
    Some(ZoomConfig { mode, width, clamp_width: *clamp_width, check_invariants: checks })
}

/// One run of one algorithm on the market of run `k`.
#[allow(clippy::too_many_arguments)]
pub fn execute_run(
    alg: &AlgorithmSpec,
    market: &Market<f64>,
    set: &CandidateSet<f64>,
    horizon: u64,
    base_seed: u64,
    k: u64,
    log_rounds: bool,
    checks: bool,
) -> Result<RunRecord> {
    let mut rng = run_rng(base_seed, k);
    let opts = RunOptions { run_id: k, log_rounds };
    let mut rec = match alg.policy() {
        None => {
            let cfg = zoom_config(alg, market, horizon, checks).expect("zooming spec");
            zooming::run_with_rng(market, set, &cfg, horizon, &mut rng, base_seed, opts)?.0
        }
        Some(policy) => nonadaptive_run_with_rng(market, set, policy, horizon, &mut rng, base_seed, opts)?,
    };
    rec.algorithm = alg.label();
    Ok(rec)
}

/// A run together with the market it was played on.
pub struct RunOutput {
    pub market: Market<f64>,
    pub set: CandidateSet<f64>,
    pub record: RunRecord,
}

/// Runs `runs` seeded repetitions in parallel; results are ordered by run id.
pub fn execute_runs(
    cfg: &ExperimentConfig,
    alg: &AlgorithmSpec,
    delta: f64,
    horizon: u64,
    log_rounds: bool,
) -> Result<Vec<RunOutput>> {
    (0..cfg.runs as u64)
        .into_par_iter()
        .map(|k| {
            let market = build_market(&cfg.env, cfg.base_seed, k)?;
            let set = candidate_set(alg, cfg.env.dim(), delta)?;
            let record = execute_run(alg, &market, &set, horizon, cfg.base_seed, k, log_rounds, cfg.debug_asserts)
                .with_context(|| format!("{} δ={delta} T={horizon} run {k}", alg.label()))?;
            Ok(RunOutput { market, set, record })
        })
        .collect()
}
