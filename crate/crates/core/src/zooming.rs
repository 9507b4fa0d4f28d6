//! Adaptive zooming over dyadic cells of the increment space.
//!
//! The algorithm keeps a set of active cells covering every candidate. Each
//! round it picks the active cell with the largest index, posts one of its
//! anchors (a fair coin decides between the two corners of a composite cell),
//! and splits the cell into its relevant quadrants once the estimated virtual
//! width exceeds the zooming threshold (five confidence radii in the
//! theoretical regime).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::envs::{Environment, Observation};
use crate::error::{Error, Result};
use crate::mesh::{Anchors, CandidateSet, Cell, CellCount};
use crate::model::Contract;
use crate::record::{AnchorKind, Recorder, RoundLog, RunRecord};
use crate::scalar::Scalar;

/// Confidence radius regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfidenceMode<S> {
    /// `rad = sqrt(c_rad · ln T / n)` in both rules; composite cells get
    /// `5·rad` in the index and zoom once `W > 5·rad`.
    Theoretical { c_rad: S, horizon: u64 },
    /// The constants replace the whole confidence term of each rule: every
    /// cell gets `c_select / sqrt(n)` in the index, and a cell zooms once
    /// `W > c_zoom / sqrt(n)`.
    Constant { c_select: S, c_zoom: S },
    /// `rad = c_select / sqrt(n)` for selection and `c_zoom / sqrt(n)` for
    /// zooming, with the factor 5 of the theoretical rules kept.
    ConstantRadius { c_select: S, c_zoom: S },
}

impl<S: Scalar> ConfidenceMode<S> {
    /// Factor on the radius in the composite index and the zooming rule.
    pub fn width_factor(&self) -> S {
        match self {
            ConfidenceMode::Constant { .. } => S::one(),
            _ => S::lit(5.0),
        }
    }
}

/// Which rule a radius is evaluated for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadiusUse {
    Select,
    Zoom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WidthEstimator {
    /// `(V⁺ − P⁻) − (V⁻ − P⁺)` from per-anchor averages.
    General,
    /// Selling with one price: `p⁺ Ŝ⁻ − p⁻ Ŝ⁺` from per-anchor sale rates.
    InventoryTwoOutcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZoomConfig<S> {
    pub mode: ConfidenceMode<S>,
    pub width: WidthEstimator,
    /// Ablation: clamp negative width estimates at zero.
    #[serde(default)]
    pub clamp_width: bool,
    /// Check the active-set invariants after every round.
    #[serde(default)]
    pub check_invariants: bool,
}

impl<S: Scalar> ZoomConfig<S> {
    /// Constants used in the simulation study: 1 for selection, 0.6 for zooming.
    pub fn simulation() -> Self {
        Self::constant(S::one(), S::lit(0.6))
    }

    pub fn constant(c_select: S, c_zoom: S) -> Self {
        Self {
            mode: ConfidenceMode::Constant { c_select, c_zoom },
            width: WidthEstimator::General,
            clamp_width: false,
            check_invariants: false,
        }
    }

    pub fn constant_radius(c_select: S, c_zoom: S) -> Self {
        Self { mode: ConfidenceMode::ConstantRadius { c_select, c_zoom }, ..Self::constant(c_select, c_zoom) }
    }

    pub fn theoretical(c_rad: S, horizon: u64) -> Self {
        Self {
            mode: ConfidenceMode::Theoretical { c_rad, horizon },
            width: WidthEstimator::General,
            clamp_width: false,
            check_invariants: false,
        }
    }

    pub fn with_width(mut self, width: WidthEstimator) -> Self {
        self.width = width;
        self
    }

    pub fn with_invariant_checks(mut self, on: bool) -> Self {
        self.check_invariants = on;
        self
    }

    /// Checks the configuration against the number of outcomes and the horizon.
    pub fn validate(&self, m: usize, horizon: u64) -> Result<()> {
        match self.mode {
            ConfidenceMode::Theoretical { c_rad, horizon: t } => {
                if !(c_rad >= S::lit(16.0)) {
                    return Err(Error::Config(format!("c_rad = {c_rad} < 16")));
                }
                let min_t = ((1u64 << m.min(62)) + 1).max(18);
                if t < min_t {
                    return Err(Error::Config(format!("horizon {t} below max(2^m+1, 18) = {min_t}")));
                }
                if horizon > t {
                    return Err(Error::Config(format!("{horizon} rounds requested, horizon is {t}")));
                }
            }
            ConfidenceMode::Constant { c_select, c_zoom } | ConfidenceMode::ConstantRadius { c_select, c_zoom } => {
                if !(c_select > S::zero() && c_zoom > S::zero()) {
                    return Err(Error::Config("confidence constants must be positive".into()));
                }
            }
        }
        if self.width == WidthEstimator::InventoryTwoOutcome && m != 1 {
            return Err(Error::Config("two-outcome width estimator needs m = 1".into()));
        }
        Ok(())
    }
}

/// Running sums for one anchor of a composite cell.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AnchorTally<S> {
    pub n: u64,
    pub sum_value: S,
    pub sum_payment: S,
    /// Rounds whose outcome was non-null.
    pub successes: u64,
}

impl<S: Scalar> AnchorTally<S> {
    fn record(&mut self, obs: &Observation<S>) {
        self.n += 1;
        self.sum_value = self.sum_value + obs.value;
        self.sum_payment = self.sum_payment + obs.payment;
        self.successes += u64::from(obs.outcome != 0);
    }

    pub fn mean_value(&self) -> Option<S> {
        (self.n > 0).then(|| self.sum_value / S::lit(self.n as f64))
    }

    pub fn mean_payment(&self) -> Option<S> {
        (self.n > 0).then(|| self.sum_payment / S::lit(self.n as f64))
    }

    pub fn success_rate(&self) -> Option<S> {
        (self.n > 0).then(|| S::lit(self.successes as f64) / S::lit(self.n as f64))
    }
}

/// Statistics of one active cell. Children start from scratch after a zoom.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CellStats<S> {
    pub n: u64,
    pub sum_utility: S,
    pub plus: AnchorTally<S>,
    pub minus: AnchorTally<S>,
}

impl<S: Scalar> CellStats<S> {
    pub fn mean_utility(&self) -> Option<S> {
        (self.n > 0).then(|| self.sum_utility / S::lit(self.n as f64))
    }

    fn record(&mut self, anchor: AnchorKind, obs: &Observation<S>) {
        self.n += 1;
        self.sum_utility = self.sum_utility + obs.utility;
        match anchor {
            AnchorKind::Plus => self.plus.record(obs),
            AnchorKind::Minus => self.minus.record(obs),
            AnchorKind::Atomic => {}
        }
    }
}

/// Confidence radius after `n` choices of a cell; infinite when `n = 0`.
pub fn confidence_radius<S: Scalar>(n: u64, cfg: &ZoomConfig<S>, usage: RadiusUse) -> S {
    if n == 0 {
        return S::infinity();
    }
    let n = S::lit(n as f64);
    match cfg.mode {
        ConfidenceMode::Theoretical { c_rad, horizon } => (c_rad * S::lit(horizon as f64).ln() / n).sqrt(),
        ConfidenceMode::Constant { c_select, c_zoom } | ConfidenceMode::ConstantRadius { c_select, c_zoom } => {
            let c = match usage {
                RadiusUse::Select => c_select,
                RadiusUse::Zoom => c_zoom,
            };
            c / n.sqrt()
        }
    }
}

/// Estimated virtual width of a composite cell; zero while an anchor is unsampled.
pub fn virtual_width_estimate<S: Scalar>(
    stats: &CellStats<S>,
    anchors: &Anchors<S>,
    cfg: &ZoomConfig<S>,
) -> Result<S> {
    let Anchors::Composite { lower, upper } = anchors else {
        return Err(Error::AtomicCell("virtual width of an atomic cell".into()));
    };
    let (p, m) = (&stats.plus, &stats.minus);
    if p.n == 0 || m.n == 0 {
        return Ok(S::zero());
    }
    let w = match cfg.width {
        WidthEstimator::General => {
            let (vp, pp) = (p.mean_value().unwrap(), p.mean_payment().unwrap());
            let (vm, pm) = (m.mean_value().unwrap(), m.mean_payment().unwrap());
            (vp - pm) - (vm - pp)
        }
        WidthEstimator::InventoryTwoOutcome => {
            let (price_hi, price_lo) = (upper.increments()[0], lower.increments()[0]);
            price_hi * m.success_rate().unwrap() - price_lo * p.success_rate().unwrap()
        }
    };
    Ok(if cfg.clamp_width { w.max(S::zero()) } else { w })
}

/// A cell in the active set, with its anchors and statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveCell<S: Scalar> {
    pub cell: Cell,
    pub anchors: Anchors<S>,
    pub stats: CellStats<S>,
}

impl<S: Scalar> ActiveCell<S> {
    pub fn width_estimate(&self, cfg: &ZoomConfig<S>) -> S {
        virtual_width_estimate(&self.stats, &self.anchors, cfg).unwrap_or_else(|_| S::zero())
    }
}

/// Selection index: `U + rad` for atomic cells, `U + W + k·rad` otherwise,
/// with `k` the mode's [`ConfidenceMode::width_factor`].
pub fn index<S: Scalar>(active: &ActiveCell<S>, cfg: &ZoomConfig<S>) -> S {
    let Some(mean) = active.stats.mean_utility() else {
        return S::infinity();
    };
    let rad = confidence_radius(active.stats.n, cfg, RadiusUse::Select);
    if active.anchors.is_atomic() {
        mean + rad
    } else {
        mean + active.width_estimate(cfg) + cfg.mode.width_factor() * rad
    }
}

/// Algorithm state: active cells, round counter and zoom history.
#[derive(Debug, Clone)]
pub struct Zooming<S: Scalar> {
    cfg: ZoomConfig<S>,
    set: CandidateSet<S>,
    active: Vec<ActiveCell<S>>,
    t: u64,
    cumulative: S,
    zooms: Vec<(u64, Cell)>,
}

/// What happened in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome<S: Scalar> {
    pub cell: Cell,
    pub anchor: AnchorKind,
    pub contract: Contract<S>,
    pub observation: Observation<S>,
    pub zoomed: bool,
}

impl<S: Scalar> Zooming<S> {
    /// Starts with the root cell as the only active cell.
    pub fn new(set: CandidateSet<S>, cfg: ZoomConfig<S>) -> Result<Self> {
        let root = Cell::root(set.m());
        let anchors = set.anchors_of(&root)?;
        Ok(Self {
            cfg,
            set,
            active: vec![ActiveCell { cell: root, anchors, stats: CellStats::default() }],
            t: 0,
            cumulative: S::zero(),
            zooms: Vec::new(),
        })
    }

    pub fn config(&self) -> &ZoomConfig<S> {
        &self.cfg
    }

    pub fn candidates(&self) -> &CandidateSet<S> {
        &self.set
    }

    pub fn active(&self) -> &[ActiveCell<S>] {
        &self.active
    }

    /// Rounds played so far.
    pub fn round(&self) -> u64 {
        self.t
    }

    pub fn cumulative_utility(&self) -> S {
        self.cumulative
    }

    /// Zoom-ins as `(round, cell split)`.
    pub fn zoom_events(&self) -> &[(u64, Cell)] {
        &self.zooms
    }

    /// Position of the active cell with the largest index. Ties (including
    /// several unplayed cells) go to the shallower cell, then the
    /// lexicographically smaller corner.
    pub fn select(&self) -> usize {
        let mut best = 0;
        let mut best_idx = index(&self.active[0], &self.cfg);
        for (i, a) in self.active.iter().enumerate().skip(1) {
            let idx = index(a, &self.cfg);
            let better = idx > best_idx || (idx == best_idx && a.cell < self.active[best].cell);
            if better {
                best = i;
                best_idx = idx;
            }
        }
        best
    }

    /// Plays one round against `env`.
    pub fn step<E: Environment<S>, R: Rng + ?Sized>(&mut self, env: &E, rng: &mut R) -> Result<StepOutcome<S>> {
        let pos = self.select();
        let chosen = &mut self.active[pos];
        let (anchor, contract) = match &chosen.anchors {
            Anchors::Atomic(c) => (AnchorKind::Atomic, c.clone()),
            Anchors::Composite { lower, upper } => {
                if rng.random::<bool>() {
                    (AnchorKind::Plus, upper.clone())
                } else {
                    (AnchorKind::Minus, lower.clone())
                }
            }
        };
        let obs = env.observe(&contract, rng);
        chosen.stats.record(anchor, &obs);
        self.t += 1;
        self.cumulative = self.cumulative + obs.utility;

        let cell = chosen.cell.clone();
        let zoomed = self.should_zoom(pos);
        if zoomed {
            self.zoom(pos)?;
        }
        if self.cfg.check_invariants {
            self.check_invariants(zoomed.then_some(&cell))?;
        }
        Ok(StepOutcome { cell, anchor, contract, observation: obs, zoomed })
    }

    fn should_zoom(&self, pos: usize) -> bool {
        let a = &self.active[pos];
        if a.anchors.is_atomic() || a.stats.plus.n == 0 || a.stats.minus.n == 0 {
            return false;
        }
        let rad = confidence_radius(a.stats.n, &self.cfg, RadiusUse::Zoom);
        self.cfg.mode.width_factor() * rad < a.width_estimate(&self.cfg)
    }

    fn zoom(&mut self, pos: usize) -> Result<()> {
        let parent = self.active.swap_remove(pos);
        for child in parent.cell.quadrants(self.set.depth_cap())? {
            if let Ok(anchors) = self.set.anchors_of(&child) {
                self.active.push(ActiveCell { cell: child, anchors, stats: CellStats::default() });
            }
        }
        self.zooms.push((self.t, parent.cell));
        Ok(())
    }

    /// Checks that every active cell holds a candidate, that finite candidate
    /// sets are covered, and that no sampled composite cell is due for a zoom.
    ///
    /// Coverage only changes when a cell is split, so it is re-verified only
    /// when `split` names the cell that was just replaced.
    pub fn check_invariants(&self, split: Option<&Cell>) -> Result<()> {
        let fail = |detail: String| Error::Invariant { round: self.t, detail };
        for a in &self.active {
            if matches!(self.set.count_candidates(&a.cell), CellCount::Zero) {
                return Err(fail(format!("active cell {} holds no candidate", a.cell)));
            }
            if a.anchors.is_atomic() || a.stats.plus.n == 0 || a.stats.minus.n == 0 {
                continue;
            }
            let w = a.width_estimate(&self.cfg);
            let threshold = self.cfg.mode.width_factor() * confidence_radius(a.stats.n, &self.cfg, RadiusUse::Zoom);
            if w > threshold {
                return Err(fail(format!("cell {} has W = {w} above the zooming threshold {threshold}", a.cell)));
            }
        }
        if let Some(cell) = split {
            if self.set.is_finite() {
                for c in self.set.candidates_in(cell)? {
                    if !self.active.iter().any(|a| a.cell.contains_point(c.increments())) {
                        return Err(fail(format!("candidate {:?} uncovered after splitting {cell}", c.increments())));
                    }
                }
            }
        }
        Ok(())
    }

    /// Full coverage check: every candidate of a finite set lies in an active cell.
    pub fn check_coverage(&self) -> Result<()> {
        if !self.set.is_finite() {
            return Ok(());
        }
        for c in self.set.enumerate()? {
            if !self.active.iter().any(|a| a.cell.contains_point(c.increments())) {
                return Err(Error::Invariant {
                    round: self.t,
                    detail: format!("candidate {:?} not covered", c.increments()),
                });
            }
        }
        Ok(())
    }
}

/// Options for [`run`] beyond the algorithm configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    pub run_id: u64,
    pub log_rounds: bool,
}

/// Plays `horizon` rounds from a fresh state with an rng seeded by `seed`.
pub fn run<S: Scalar, E: Environment<S>>(
    env: &E,
    set: &CandidateSet<S>,
    cfg: &ZoomConfig<S>,
    horizon: u64,
    seed: u64,
    opts: RunOptions,
) -> Result<(RunRecord<S>, Zooming<S>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    run_with_rng(env, set, cfg, horizon, &mut rng, seed, opts)
}

/// As [`run`], drawing from a caller-supplied rng.
pub fn run_with_rng<S: Scalar, E: Environment<S>, R: Rng + ?Sized>(
    env: &E,
    set: &CandidateSet<S>,
    cfg: &ZoomConfig<S>,
    horizon: u64,
    rng: &mut R,
    seed: u64,
    opts: RunOptions,
) -> Result<(RunRecord<S>, Zooming<S>)> {
    if env.dim() != set.m() {
        return Err(Error::DimensionMismatch { got: set.m(), expected: env.dim() });
    }
    cfg.validate(set.m(), horizon)?;
    let mut state = Zooming::new(set.clone(), *cfg)?;
    if cfg.check_invariants {
        state.check_coverage()?;
    }
    let mut rec = Recorder::new("zooming", opts.run_id, seed, opts.log_rounds, horizon);
    for _ in 0..horizon {
        let out = state.step(env, rng)?;
        if out.zoomed {
            rec.zoomed(state.round());
        }
        let active = state.active().len();
        rec.push(&out.contract, &out.observation, || RoundLog {
            t: state.round(),
            cell: out.cell.to_string(),
            anchor: out.anchor,
            observation: out.observation,
            zoomed: out.zoomed,
            active_cells: active,
        });
    }
    if cfg.check_invariants {
        state.check_coverage()?;
    }
    Ok((rec.finish(), state))
}
