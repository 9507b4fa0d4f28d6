//! Non-adaptive baselines: a finite-armed bandit over a fixed candidate set.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::mesh::CandidateSet;
use crate::record::{AnchorKind, Recorder, RoundLog, RunRecord};
use crate::scalar::Scalar;
use crate::zooming::RunOptions;

/// Prior mean of the Gaussian Thompson sampler.
pub const THOMPSON_PRIOR_MEAN: f64 = 0.5;
/// Prior variance of the Gaussian Thompson sampler; observation noise is 1.
pub const THOMPSON_PRIOR_VAR: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BanditPolicy {
    /// `mean + sqrt(2 ln t / n)`.
    Ucb1,
    /// `mean + c / sqrt(n)`.
    Ucb1Constant(f64),
    ThompsonGaussian,
}

impl BanditPolicy {
    pub fn name(&self) -> String {
        match self {
            BanditPolicy::Ucb1 => "ucb1".into(),
            BanditPolicy::Ucb1Constant(c) => format!("ucb1_const({c})"),
            BanditPolicy::ThompsonGaussian => "thompson".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ArmStats {
    pub pulls: u64,
    pub sum: f64,
}

impl ArmStats {
    pub fn mean(&self) -> Option<f64> {
        (self.pulls > 0).then(|| self.sum / self.pulls as f64)
    }

    pub fn record(&mut self, reward: f64) {
        self.pulls += 1;
        self.sum += reward;
    }
}

/// UCB index at global round count `t`; `+∞` for an unpulled arm.
/// Thompson sampling has no index and yields the posterior mean.
pub fn ucb1_index(arm: &ArmStats, t: f64, policy: BanditPolicy) -> f64 {
    let Some(mean) = arm.mean() else {
        return f64::INFINITY;
    };
    let n = arm.pulls as f64;
    match policy {
        BanditPolicy::Ucb1 => mean + (2.0 * t.ln() / n).sqrt(),
        BanditPolicy::Ucb1Constant(c) => mean + c / n.sqrt(),
        BanditPolicy::ThompsonGaussian => posterior(arm).0,
    }
}

fn posterior(arm: &ArmStats) -> (f64, f64) {
    let prec = 1.0 / THOMPSON_PRIOR_VAR + arm.pulls as f64;
    ((THOMPSON_PRIOR_MEAN / THOMPSON_PRIOR_VAR + arm.sum) / prec, 1.0 / prec)
}

/// One draw from the Gaussian posterior of an arm.
pub fn thompson_draw<R: Rng + ?Sized>(arm: &ArmStats, rng: &mut R) -> f64 {
    let (mean, var) = posterior(arm);
    Normal::new(mean, var.sqrt()).expect("positive variance").sample(rng)
}

/// Arm statistics plus the selection rule shared by every baseline run.
#[derive(Debug, Clone)]
pub struct ArmBandit {
    policy: BanditPolicy,
    arms: Vec<ArmStats>,
    t: u64,
}

impl ArmBandit {
    pub fn new(arms: usize, policy: BanditPolicy) -> Self {
        Self { policy, arms: vec![ArmStats::default(); arms], t: 0 }
    }

    pub fn arms(&self) -> &[ArmStats] {
        &self.arms
    }

    pub fn round(&self) -> u64 {
        self.t
    }

    /// The arm to pull next. Every arm is pulled once, in order, before any
    /// index is compared; ties go to the lower position.
    pub fn choose<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if let Some(i) = self.arms.iter().position(|a| a.pulls == 0) {
            return i;
        }
        let t = self.t as f64;
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (i, a) in self.arms.iter().enumerate() {
            let s = match self.policy {
                BanditPolicy::ThompsonGaussian => thompson_draw(a, rng),
                p => ucb1_index(a, t, p),
            };
            if s > best_score {
                best = i;
                best_score = s;
            }
        }
        best
    }

    pub fn update(&mut self, arm: usize, reward: f64) {
        self.arms[arm].record(reward);
        self.t += 1;
    }
}

/// Runs `policy` over the candidates of a finite set, presented in an order
/// shuffled by the run's rng.
pub fn nonadaptive_run<S: Scalar, E: Environment<S>>(
    env: &E,
    set: &CandidateSet<S>,
    policy: BanditPolicy,
    horizon: u64,
    seed: u64,
    opts: RunOptions,
) -> Result<RunRecord<S>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    nonadaptive_run_with_rng(env, set, policy, horizon, &mut rng, seed, opts)
}

pub fn nonadaptive_run_with_rng<S: Scalar, E: Environment<S>, R: Rng + ?Sized>(
    env: &E,
    set: &CandidateSet<S>,
    policy: BanditPolicy,
    horizon: u64,
    rng: &mut R,
    seed: u64,
    opts: RunOptions,
) -> Result<RunRecord<S>> {
    if !set.is_finite() {
        return Err(Error::CandidateSet("baselines need a finite candidate set".into()));
    }
    if env.dim() != set.m() {
        return Err(Error::DimensionMismatch { got: set.m(), expected: env.dim() });
    }
    let mut arms = set.enumerate()?;
    if arms.is_empty() {
        return Err(Error::CandidateSet("empty candidate set".into()));
    }
    if let BanditPolicy::Ucb1Constant(c) = policy {
        if !(c > 0.0) {
            return Err(Error::Config(format!("UCB constant {c} must be positive")));
        }
    }
    arms.shuffle(rng);
    let labels: Vec<String> = if opts.log_rounds { arms.iter().map(contract_label).collect() } else { Vec::new() };

    let mut bandit = ArmBandit::new(arms.len(), policy);
    let mut rec = Recorder::new(policy.name(), opts.run_id, seed, opts.log_rounds, horizon);
    for _ in 0..horizon {
        let i = bandit.choose(rng);
        let obs = env.observe(&arms[i], rng);
        bandit.update(i, obs.utility.as_f64());
        let t = bandit.round();
        rec.push(&arms[i], &obs, || RoundLog {
            t,
            cell: labels[i].clone(),
            anchor: AnchorKind::Atomic,
            observation: obs,
            zoomed: false,
            active_cells: arms.len(),
        });
    }
    Ok(rec.finish())
}

fn contract_label<S: Scalar>(c: &crate::model::Contract<S>) -> String {
    let parts: Vec<String> = c.increments().iter().map(|w| w.to_string()).collect();
    format!("({})", parts.join(","))
}
