//! Exact-oracle analytics: benchmark search, regret accounting, width versus
//! virtual width, and the census of wide near-optimal cells.

use std::collections::HashMap;

use rand::Rng;
use serde::Serialize;

use crate::curve::{Monotonicity, PiecewiseLinear};
use crate::envs::{make_inventory_env, make_taskpricing, Environment, Market, SupplyModel};
use crate::error::{Error, Result};
use crate::mesh::{CandidateSet, Cell, CellCount, UniformMesh};
use crate::model::{Contract, OutcomeSpace, WorkerType};
use crate::record::RunRecord;
use crate::scalar::Scalar;
use crate::zooming::WidthEstimator;

/// Best candidate by exhaustive exact search; the lexicographically first
/// maximiser wins ties.
pub fn opt_search<S: Scalar, E: Environment<S>>(env: &E, set: &CandidateSet<S>) -> Result<(Contract<S>, S)> {
    let mut best: Option<(Contract<S>, S)> = None;
    for c in set.enumerate()? {
        let u = env.exact_utility(&c)?;
        if best.as_ref().is_none_or(|(_, b)| u > *b) {
            best = Some((c, u));
        }
    }
    best.ok_or_else(|| Error::CandidateSet("no candidates".into()))
}

/// Approximates `sup U` over all bounded monotone contracts on a grid of step `step`.
pub fn opt_search_grid<S: Scalar, E: Environment<S>>(env: &E, step: f64) -> Result<(Contract<S>, S)> {
    opt_search(env, &CandidateSet::UniformMesh(UniformMesh::new(env.dim(), step)?))
}

/// Best payment vector `x(0..=m)` over `x(π) ∈ step·ℕ ∩ [0,1]` without the
/// monotonicity restriction. Needs a finite-mixture market.
pub fn opt_search_unrestricted<S: Scalar>(market: &Market<S>, step: f64) -> Result<(Vec<S>, S)> {
    let grid = UniformMesh::new(1, step)?;
    let k = grid.budget();
    let (num, den) = (*grid.step().numer() as f64, *grid.step().denom() as f64);
    let m = market.outcomes().m();
    let mut idx = vec![0u64; m];
    let mut best: Option<(Vec<S>, S)> = None;
    loop {
        let mut pay = vec![S::zero()];
        pay.extend(idx.iter().map(|&i| S::lit(i as f64 * num / den)));
        let u = market.breakdown_for_payments(&pay)?.utility;
        if best.as_ref().is_none_or(|(_, b)| u > *b) {
            best = Some((pay, u));
        }
        // odometer, last coordinate fastest
        let mut pos = m;
        loop {
            if pos == 0 {
                return Ok(best.expect("non-empty grid"));
            }
            pos -= 1;
            if idx[pos] < k {
                idx[pos] += 1;
                idx[pos + 1..].iter_mut().for_each(|v| *v = 0);
                break;
            }
        }
    }
}

fn corner_contracts<S: Scalar>(cell: &Cell) -> (Contract<S>, Contract<S>) {
    (
        Contract::from_increments_unchecked(cell.lower()),
        Contract::from_increments_unchecked(cell.upper()),
    )
}

/// Exact virtual width of a cell: `(V(x⁺) − P(x⁻)) − (V(x⁻) − P(x⁺))`, or for
/// inventory pricing `p⁺ S(p⁻) − p⁻ S(p⁺)`.
pub fn exact_virtual_width<S: Scalar>(
    market: &Market<S>,
    cell: &Cell,
    set: &CandidateSet<S>,
    estimator: WidthEstimator,
) -> Result<S> {
    if !matches!(set.count_candidates(cell), CellCount::Many) {
        return Err(Error::AtomicCell(format!("cell {cell} is not composite")));
    }
    virtual_width_of_corners(market, cell, estimator)
}

fn virtual_width_of_corners<S: Scalar>(market: &Market<S>, cell: &Cell, estimator: WidthEstimator) -> Result<S> {
    let (lo, hi) = corner_contracts::<S>(cell);
    match estimator {
        WidthEstimator::General => {
            let (bl, bh) = (market.exact_breakdown(&lo)?, market.exact_breakdown(&hi)?);
            Ok((bh.value - bl.payment) - (bl.value - bh.payment))
        }
        WidthEstimator::InventoryTwoOutcome => {
            if cell.dim() != 1 {
                return Err(Error::DimensionMismatch { got: cell.dim(), expected: 1 });
            }
            let (s_lo, s_hi) = (market.success_probability(&lo)?, market.success_probability(&hi)?);
            Ok(hi.increments()[0] * s_lo - lo.increments()[0] * s_hi)
        }
    }
}

/// Grid lower bound on `width(C) = sup |U(x) − U(y)|` over the closed cell,
/// using `divisions` equal steps per side.
pub fn exact_width<S: Scalar, E: Environment<S>>(env: &E, cell: &Cell, divisions: u64) -> Result<S> {
    if divisions < 8 {
        return Err(Error::Config("width grid needs at least 8 steps per side".into()));
    }
    let lo = cell.lower::<S>();
    let side = cell.side::<S>();
    let n = S::lit(divisions as f64);
    let m = cell.dim();
    let mut idx = vec![0u64; m];
    let (mut min, mut max) = (S::infinity(), S::neg_infinity());
    loop {
        let x: Vec<S> = idx.iter().zip(&lo).map(|(&i, &l)| l + side * S::lit(i as f64) / n).collect();
        let u = env.exact_utility(&Contract::from_increments_unchecked(x))?;
        min = min.min(u);
        max = max.max(u);
        let mut pos = m;
        loop {
            if pos == 0 {
                return Ok(max - min);
            }
            pos -= 1;
            if idx[pos] < divisions {
                idx[pos] += 1;
                idx[pos + 1..].iter_mut().for_each(|v| *v = 0);
                break;
            }
        }
    }
}

/// Regret of one run, three ways.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunRegret {
    pub run_id: u64,
    /// `T·OPT − Σ_t U(x_t)`.
    pub oracle: f64,
    /// `Σ_x n(x) Δ(x)`.
    pub badness: f64,
    /// `T·OPT − Σ_t u_t` with realised utilities.
    pub realized: f64,
    /// Time-averaged realised utility.
    pub average_utility: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

impl MeanSe {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        if xs.is_empty() {
            return Self { mean: f64::NAN, se: f64::NAN };
        }
        let mean = xs.iter().sum::<f64>() / n;
        if xs.len() < 2 {
            return Self { mean, se: 0.0 };
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Self { mean, se: (var / n).sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretReport {
    pub algorithm: String,
    pub opt: f64,
    pub opt_contract: Vec<f64>,
    pub horizon: u64,
    pub runs: Vec<RunRegret>,
    pub oracle: MeanSe,
    pub realized: MeanSe,
    pub average_utility: MeanSe,
}

/// Regret accounting for runs that share an environment, candidate set and
/// horizon. `OPT` comes from exhaustive search over a finite set, or over a
/// grid of step `full_space_step` when the set is the full space.
pub fn regret_report<S: Scalar, E: Environment<S>>(
    runs: &[RunRecord<S>],
    env: &E,
    set: &CandidateSet<S>,
    full_space_step: Option<f64>,
) -> Result<RegretReport> {
    let first = runs.first().ok_or_else(|| Error::RunMismatch("no runs".into()))?;
    for r in runs {
        if r.horizon() != first.horizon() || r.algorithm != first.algorithm {
            return Err(Error::RunMismatch(format!(
                "run {} ({}, T={}) differs from run {} ({}, T={})",
                r.run_id,
                r.algorithm,
                r.horizon(),
                first.run_id,
                first.algorithm,
                first.horizon()
            )));
        }
        if r.contracts.iter().any(|c| c.dim() != set.m()) {
            return Err(Error::RunMismatch(format!("run {} posted contracts of the wrong dimension", r.run_id)));
        }
    }
    let (opt_c, opt) = match (set.is_finite(), full_space_step) {
        (true, _) => opt_search(env, set)?,
        (false, Some(step)) => opt_search_grid(env, step)?,
        (false, None) => return Err(Error::CandidateSet("full space needs a grid step for OPT".into())),
    };
    let opt_f = opt.as_f64();
    let mut cache: HashMap<Vec<u64>, f64> = HashMap::new();
    let mut out = Vec::with_capacity(runs.len());
    for r in runs {
        let utils: Vec<f64> = r
            .contracts
            .iter()
            .map(|c| {
                let key: Vec<u64> = c.increments().iter().map(|w| w.as_f64().to_bits()).collect();
                if let Some(u) = cache.get(&key) {
                    return Ok(*u);
                }
                let u = env.exact_utility(c)?.as_f64();
                cache.insert(key, u);
                Ok(u)
            })
            .collect::<Result<_>>()?;
        let t = r.horizon() as f64;
        let posted_sum: f64 = r.posted.iter().map(|&i| utils[i as usize]).sum();
        let badness: f64 = r
            .posting_counts()
            .iter()
            .zip(&utils)
            .map(|(&n, &u)| n as f64 * (opt_f - u))
            .sum();
        let realized_sum: f64 = r.utilities.iter().map(|u| u.as_f64()).sum();
        out.push(RunRegret {
            run_id: r.run_id,
            oracle: t * opt_f - posted_sum,
            badness,
            realized: t * opt_f - realized_sum,
            average_utility: if t > 0.0 { realized_sum / t } else { 0.0 },
        });
    }
    let col = |f: fn(&RunRegret) -> f64| MeanSe::of(&out.iter().map(f).collect::<Vec<_>>());
    Ok(RegretReport {
        algorithm: first.algorithm.clone(),
        opt: opt_f,
        opt_contract: opt_c.increments().iter().map(|w| w.as_f64()).collect(),
        horizon: first.horizon(),
        oracle: col(|r| r.oracle),
        realized: col(|r| r.realized),
        average_utility: col(|r| r.average_utility),
        runs: out,
    })
}

/// Exact utilities on the dyadic grid of depth `depth` over `[0,1]^m`.
struct UtilityGrid {
    m: usize,
    depth: u32,
    side: usize,
    values: Vec<f64>,
}

impl UtilityGrid {
    fn new<S: Scalar, E: Environment<S>>(env: &E, m: usize, depth: u32) -> Result<Self> {
        let side = (1usize << depth) + 1;
        let total = side.checked_pow(m as u32).filter(|&n| n <= MAX_GRID_POINTS);
        let Some(total) = total else {
            return Err(Error::CensusGuard(MAX_GRID_POINTS));
        };
        let mut values = Vec::with_capacity(total);
        let mut idx = vec![0u64; m];
        for flat in 0..total {
            let mut rem = flat;
            for d in (0..m).rev() {
                idx[d] = (rem % side) as u64;
                rem /= side;
            }
            let x = idx.iter().map(|&i| crate::scalar::dyadic(i, depth)).collect();
            values.push(env.exact_utility(&Contract::<S>::from_increments_unchecked(x))?.as_f64());
        }
        Ok(Self { m, depth, side, values })
    }

    /// `(min, max)` of utility over grid points in the cell, and the max over
    /// those points that are bounded contracts.
    fn cell_extremes(&self, cell: &Cell) -> (f64, f64, f64) {
        let shift = self.depth - cell.depth();
        let ranges: Vec<(usize, usize)> = cell
            .corner()
            .iter()
            .map(|&k| ((k << shift) as usize, ((k + 1) << shift) as usize))
            .collect();
        let budget = 1usize << self.depth;
        let (mut lo, mut hi, mut hi_bounded) = (f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        let mut idx: Vec<usize> = ranges.iter().map(|r| r.0).collect();
        loop {
            let flat = idx.iter().fold(0usize, |acc, &i| acc * self.side + i);
            let u = self.values[flat];
            lo = lo.min(u);
            hi = hi.max(u);
            if idx.iter().sum::<usize>() <= budget {
                hi_bounded = hi_bounded.max(u);
            }
            let mut pos = self.m;
            loop {
                if pos == 0 {
                    return (lo, hi, hi_bounded);
                }
                pos -= 1;
                if idx[pos] < ranges[pos].1 {
                    idx[pos] += 1;
                    for q in pos + 1..self.m {
                        idx[q] = ranges[q].0;
                    }
                    break;
                }
            }
        }
    }

    fn bounded_max(&self) -> f64 {
        self.cell_extremes(&Cell::root(self.m)).2
    }
}

/// Largest utility grid the census will evaluate.
pub const MAX_GRID_POINTS: usize = 1 << 24;
/// Largest number of feasible cells the census will enumerate.
pub const MAX_CENSUS_CELLS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CensusRow {
    pub cell: String,
    pub depth: u32,
    pub virtual_width: f64,
    /// Grid lower bound on the width.
    pub width: f64,
    /// `OPT − max U` over candidates in the cell.
    pub badness: f64,
    /// Whether the maximal corner is itself a bounded contract.
    pub upper_bounded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WidthDimFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub eps_list: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Census {
    pub opt: f64,
    /// Step of the grid used for widths (and for `OPT` on the full space).
    pub grid_step: f64,
    pub beta: f64,
    pub rows: Vec<CensusRow>,
    /// `(ε, N)` with `N` the number of rows with `vw ≥ βε` and badness `≤ ε`.
    pub counts: Vec<(f64, usize)>,
    pub fit: Option<WidthDimFit>,
}

/// Default census scales `ε = 2^-3 … 2^-8`.
pub fn default_eps_list() -> Vec<f64> {
    (3..=8).map(|j| 0.5f64.powi(j)).collect()
}

/// Enumerates all feasible composite cells down to `max_depth` and counts the
/// wide ones that overlap the `ε`-optimal contracts.
pub fn cell_census<S: Scalar>(
    market: &Market<S>,
    set: &CandidateSet<S>,
    max_depth: u32,
    eps_list: &[f64],
    beta: f64,
) -> Result<Census> {
    let m = set.m();
    let estimator = if market.is_inventory() { WidthEstimator::InventoryTwoOutcome } else { WidthEstimator::General };

    let mut cells = Vec::new();
    let mut frontier = vec![Cell::root(m)];
    while let Some(c) = frontier.pop() {
        if !matches!(set.count_candidates(&c), CellCount::Many) {
            continue;
        }
        if c.depth() < max_depth {
            frontier.extend(c.quadrants(set.depth_cap())?);
        }
        cells.push(c);
        if cells.len() > MAX_CENSUS_CELLS {
            return Err(Error::CensusGuard(MAX_CENSUS_CELLS));
        }
    }
    cells.sort();

    let grid = UtilityGrid::new(market, m, max_depth + 2)?;
    let grid_step = 0.5f64.powi(grid.depth as i32);
    let finite = set.is_finite();
    let mut cand_u: HashMap<Vec<u64>, f64> = HashMap::new();
    let opt = if finite { opt_search(market, set)?.1.as_f64() } else { grid.bounded_max() };

    let mut rows = Vec::with_capacity(cells.len());
    for c in &cells {
        let (lo, hi, hi_bounded) = grid.cell_extremes(c);
        let best_in = if finite {
            let mut best = f64::NEG_INFINITY;
            for x in set.candidates_in(c)? {
                let key: Vec<u64> = x.increments().iter().map(|w| w.as_f64().to_bits()).collect();
                let u = match cand_u.get(&key) {
                    Some(u) => *u,
                    None => {
                        let u = market.exact_utility(&x)?.as_f64();
                        cand_u.insert(key, u);
                        u
                    }
                };
                best = best.max(u);
            }
            best
        } else {
            hi_bounded
        };
        let upper_sum: f64 = c.upper::<f64>().iter().sum();
        rows.push(CensusRow {
            cell: c.to_string(),
            depth: c.depth(),
            virtual_width: virtual_width_of_corners(market, c, estimator)?.as_f64(),
            width: hi - lo,
            badness: opt - best_in,
            upper_bounded: upper_sum <= 1.0,
        });
    }

    let counts: Vec<(f64, usize)> = eps_list
        .iter()
        .map(|&e| (e, rows.iter().filter(|r| r.virtual_width >= beta * e && r.badness <= e).count()))
        .collect();
    let fit = fit_width_dimension(&counts);
    Ok(Census { opt, grid_step, beta, rows, counts, fit })
}

/// Least-squares slope of `ln N` against `ln(1/ε)` over scales with `N > 0`.
pub fn fit_width_dimension(counts: &[(f64, usize)]) -> Option<WidthDimFit> {
    let pts: Vec<(f64, f64)> = counts
        .iter()
        .filter(|(_, n)| *n > 0)
        .map(|&(e, n)| ((1.0 / e).ln(), (n as f64).ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Some(WidthDimFit {
        slope,
        intercept: my - slope * mx,
        r2,
        eps_list: counts.iter().filter(|(_, n)| *n > 0).map(|c| c.0).collect(),
    })
}

/// A cell where the grid width exceeded the virtual width.
#[derive(Debug, Clone, PartialEq)]
pub struct WidthCounterexample<S: Scalar> {
    pub trial: usize,
    pub market: Market<S>,
    pub cell: Cell,
    pub width: f64,
    pub virtual_width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WidthBoundReport<S: Scalar> {
    pub checked: usize,
    /// Smallest `vw − width` seen.
    pub worst_margin: f64,
    pub counterexample: Option<WidthCounterexample<S>>,
}

impl<S: Scalar> WidthBoundReport<S> {
    pub fn passed(&self) -> bool {
        self.counterexample.is_none()
    }
}

/// Tolerance on `width ≤ vw`.
pub const WIDTH_BOUND_TOL: f64 = 1e-9;

/// Draws `trials` markets from `generator` and `cells_per_trial` random dyadic
/// cells (depth at most `max_depth`, minimal corner bounded) per market, and
/// checks that the grid width never exceeds the virtual width. Stops at the
/// first counterexample.
pub fn verify_width_bound<S, R, G>(
    mut generator: G,
    trials: usize,
    cells_per_trial: usize,
    max_depth: u32,
    divisions: u64,
    rng: &mut R,
) -> Result<WidthBoundReport<S>>
where
    S: Scalar,
    R: Rng + ?Sized,
    G: FnMut(&mut R) -> Result<Market<S>>,
{
    let mut report = WidthBoundReport { checked: 0, worst_margin: f64::INFINITY, counterexample: None };
    for trial in 0..trials {
        let market = generator(rng)?;
        let estimator = if market.is_inventory() { WidthEstimator::InventoryTwoOutcome } else { WidthEstimator::General };
        let m = market.dim();
        for _ in 0..cells_per_trial {
            let cell = random_cell(m, max_depth, rng);
            let w = exact_width(&market, &cell, divisions)?.as_f64();
            let vw = virtual_width_of_corners(&market, &cell, estimator)?.as_f64();
            report.checked += 1;
            report.worst_margin = report.worst_margin.min(vw - w);
            if w > vw + WIDTH_BOUND_TOL {
                report.counterexample = Some(WidthCounterexample { trial, market, cell, width: w, virtual_width: vw });
                return Ok(report);
            }
        }
    }
    Ok(report)
}

/// Uniform depth in `0..=max_depth`, then a uniform corner whose coordinates
/// sum to at most `2^depth` (the cell meets the bounded contracts).
pub fn random_cell<R: Rng + ?Sized>(m: usize, max_depth: u32, rng: &mut R) -> Cell {
    let depth = rng.random_range(0..=max_depth);
    let n = 1u64 << depth;
    loop {
        let corner: Vec<u64> = (0..m).map(|_| rng.random_range(0..n)).collect();
        if corner.iter().sum::<u64>() <= n {
            return Cell::new(depth, corner).expect("corner on grid");
        }
    }
}

fn sorted_uniforms<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Random FOSD-ordered market with `m` outcomes, up to `max_efforts` effort
/// levels (null included) and up to `max_types` worker types.
///
/// Effort levels of a type form a dominance chain: the top level has upper
/// cumulatives `G = (1, g_2 ≥ … ≥ g_m)`, each lower level multiplies the
/// previous one by a non-increasing factor `a ∈ (0,1]^m` with `a_1 = 1` and
/// `a_m < 1`. With `m = 1` all non-null levels would coincide, so there is
/// exactly one.
pub fn random_fosd_market<R: Rng + ?Sized>(
    m: usize,
    max_efforts: usize,
    max_types: usize,
    rng: &mut R,
) -> Result<Market<f64>> {
    if m == 0 || max_efforts < 2 || max_types == 0 {
        return Err(Error::Config("need m ≥ 1, two effort levels and one type".into()));
    }
    let mut values = vec![0.0];
    values.extend(sorted_uniforms(m, rng));
    let outcomes = OutcomeSpace::new(values)?;
    let n_types = rng.random_range(1..=max_types);
    let mut types = Vec::with_capacity(n_types);
    for _ in 0..n_types {
        let levels = if m == 1 { 1 } else { rng.random_range(1..max_efforts) };
        // upper cumulatives F(1..=m), top level first
        let mut chain: Vec<Vec<f64>> = Vec::with_capacity(levels);
        let mut g = vec![1.0];
        g.extend(sorted_uniforms(m - 1, rng).into_iter().rev());
        chain.push(g);
        for _ in 1..levels {
            let mut a = vec![1.0];
            a.extend(sorted_uniforms(m - 1, rng).into_iter().rev().map(|u| 0.05 + 0.9 * u));
            let prev = chain.last().unwrap();
            chain.push(prev.iter().zip(&a).map(|(p, a)| p * a).collect());
        }
        chain.reverse();
        let mut costs = vec![0.0];
        costs.extend(sorted_uniforms(levels, rng).into_iter().map(|c| 0.5 * c));
        let mut production = vec![{
            let mut r = vec![0.0; m + 1];
            r[0] = 1.0;
            r
        }];
        for f_up in &chain {
            let mut row = vec![0.0];
            for pi in 0..m {
                let next = if pi + 1 < m { f_up[pi + 1] } else { 0.0 };
                row.push(f_up[pi] - next);
            }
            production.push(row);
        }
        types.push(WorkerType::new(costs, production, None)?);
    }
    let raw: Vec<f64> = (0..n_types).map(|_| 0.1 + rng.random::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    let weights = raw.iter().map(|w| w / total).collect();
    Market::new(outcomes, SupplyModel::FiniteMixture { types, weights })
}

/// Random monotone piecewise-linear curve on `[0,1]` with `knots` interior knots.
pub fn random_curve<R: Rng + ?Sized>(knots: usize, dir: Monotonicity, rng: &mut R) -> Result<PiecewiseLinear<f64>> {
    let mut xs = vec![0.0];
    xs.extend(sorted_uniforms(knots, rng));
    xs.push(1.0);
    xs.dedup();
    let mut ys = sorted_uniforms(xs.len(), rng);
    if dir == Monotonicity::NonIncreasing {
        ys.reverse();
    }
    PiecewiseLinear::monotone(xs, ys, dir)
}

/// Task pricing with a random non-decreasing acceptance curve and value in `[1/2, 1]`.
pub fn random_taskpricing_market<R: Rng + ?Sized>(rng: &mut R) -> Result<Market<f64>> {
    let k = rng.random_range(0..6);
    let accept = random_curve(k, Monotonicity::NonDecreasing, rng)?;
    make_taskpricing(accept, 0.5 + 0.5 * rng.random::<f64>())
}

/// Inventory pricing with a random non-increasing demand curve.
pub fn random_inventory_market<R: Rng + ?Sized>(rng: &mut R) -> Result<Market<f64>> {
    let k = rng.random_range(0..6);
    make_inventory_env(random_curve(k, Monotonicity::NonIncreasing, rng)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{make_nonmonotone_example, make_uniform_market};
    use crate::record::Recorder;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity_pricing() -> Market<f64> {
        make_taskpricing(PiecewiseLinear::identity(), 1.0).unwrap()
    }

    fn interval(depth: u32, k: u64) -> Cell {
        Cell::new(depth, vec![k]).unwrap()
    }

    #[test]
    fn opt_of_identity_pricing() {
        let (c, u) = opt_search_grid(&identity_pricing(), 1e-3).unwrap();
        assert!((u - 0.25).abs() < 1e-6);
        assert!((c.increments()[0] - 0.5).abs() < 1e-3);
    }

    #[test]
    fn opt_of_zero_values_is_zero_contract() {
        let ty = WorkerType::high_low(0.2, 0.8).unwrap();
        let market = Market::new(
            OutcomeSpace::new(vec![0.0, 0.0, 0.0]).unwrap(),
            SupplyModel::FiniteMixture { types: vec![ty], weights: vec![1.0] },
        )
        .unwrap();
        let (c, u) = opt_search_grid(&market, 0.1).unwrap();
        assert_eq!(u, 0.0);
        assert_eq!(c, Contract::zero(2));
    }

    #[test]
    fn nonmonotone_optimum() {
        let market = make_nonmonotone_example::<f64>(0.2, [0.0, 0.0, 0.6, 1.0]).unwrap();
        let (pay, u) = opt_search_unrestricted(&market, 0.01).unwrap();
        assert_eq!(pay, vec![0.0, 0.0, 0.4, 0.0]);
        assert!((u - 0.6).abs() < 1e-12);
        let (_, mono) = opt_search_grid(&market, 0.05).unwrap();
        assert!((mono - 0.5).abs() < 1e-12);
    }

    #[test]
    fn virtual_width_examples() {
        let set = CandidateSet::full_space(1);
        let c = interval(2, 1); // [0.25, 0.5]
        let vw = exact_virtual_width(&identity_pricing(), &c, &set, WidthEstimator::General).unwrap();
        assert!((vw - 0.4375).abs() < 1e-12);
        let w = exact_width(&identity_pricing(), &c, 256).unwrap();
        assert!((w - 0.0625).abs() < 1e-12);
        assert!(w <= vw);

        let inv = make_inventory_env(PiecewiseLinear::monotone(vec![0.0, 1.0], vec![1.0, 0.0], Monotonicity::NonIncreasing).unwrap()).unwrap();
        let vw2 = exact_virtual_width(&inv, &c, &set, WidthEstimator::InventoryTwoOutcome).unwrap();
        assert!((vw2 - 0.25).abs() < 1e-12);

        let mesh = CandidateSet::uniform_mesh(1, 0.5).unwrap();
        assert!(exact_virtual_width(&identity_pricing(), &c, &mesh, WidthEstimator::General).is_err());
    }

    #[test]
    fn width_of_a_deep_cell_is_small() {
        let c = Cell::new(MAX_DEPTH_TEST, vec![1 << (MAX_DEPTH_TEST - 1)]).unwrap();
        assert!(exact_width(&identity_pricing(), &c, 8).unwrap() < 1e-12);
        assert!(exact_width(&identity_pricing(), &c, 4).is_err());
    }
    const MAX_DEPTH_TEST: u32 = 40;

    fn fixed_run(contract: Contract<f64>, t: u64) -> RunRecord<f64> {
        let env = make_uniform_market::<f64>();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut rec = Recorder::new("fixed", 0, 0, false, t);
        for _ in 0..t {
            let obs = env.observe(&contract, &mut rng);
            rec.push(&contract, &obs, || unreachable!());
        }
        rec.finish()
    }

    #[test]
    fn regret_routes() {
        let env = make_uniform_market::<f64>();
        let set = CandidateSet::uniform_mesh(2, 0.05).unwrap();
        let (opt_c, opt) = opt_search(&env, &set).unwrap();
        let rep = regret_report(&[fixed_run(opt_c, 100)], &env, &set, None).unwrap();
        assert!(rep.runs[0].oracle.abs() < 1e-9);
        assert!(rep.runs[0].badness.abs() < 1e-9);

        let x = Contract::new(vec![0.1, 0.2]).unwrap();
        let delta = opt - env.exact_utility(&x).unwrap();
        let rep = regret_report(&[fixed_run(x, 300)], &env, &set, None).unwrap();
        assert!((rep.runs[0].oracle - 300.0 * delta).abs() < 1e-9);
        assert!((rep.runs[0].badness - 300.0 * delta).abs() < 1e-9);
    }

    #[test]
    fn regret_rejects_mixed_runs() {
        let env = make_uniform_market::<f64>();
        let set = CandidateSet::uniform_mesh(2, 0.5).unwrap();
        let a = fixed_run(Contract::zero(2), 10);
        let b = fixed_run(Contract::zero(2), 11);
        assert!(matches!(regret_report(&[a, b], &env, &set, None), Err(Error::RunMismatch(_))));
    }

    #[test]
    fn census_counts_shrink_with_eps() {
        let market = identity_pricing();
        let set = CandidateSet::full_space(1);
        let eps = default_eps_list();
        let census = cell_census(&market, &set, 8, &eps, 1.0).unwrap();
        assert!(census.rows.iter().all(|r| r.width <= r.virtual_width + 1e-9));
        // ε ordered decreasing: counts non-decreasing
        assert!(census.counts.windows(2).all(|w| w[0].1 <= w[1].1));
        let huge = cell_census(&market, &set, 4, &[10.0], 1.0).unwrap();
        assert_eq!(huge.counts[0].1, 0);
    }

    #[test]
    fn fit_recovers_a_power_law() {
        let counts: Vec<(f64, usize)> = (3..=8).map(|j| (0.5f64.powi(j), 1usize << j)).collect();
        let fit = fit_width_dimension(&counts).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-12);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
        assert!(fit_width_dimension(&[(0.5, 3)]).is_none());
    }

    #[test]
    fn generated_markets_are_fosd() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for m in 1..=3 {
            for _ in 0..50 {
                let market = random_fosd_market(m, 4, 5, &mut rng).unwrap();
                let SupplyModel::FiniteMixture { types, .. } = market.supply() else { panic!() };
                assert!(types.iter().all(|t| t.validate().is_ok() && t.effort_count() <= 4));
            }
        }
    }

    #[test]
    fn small_width_bound_sweep() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rep = verify_width_bound(|r| random_fosd_market(2, 4, 3, r), 10, 10, 3, 8, &mut rng).unwrap();
        assert!(rep.passed(), "{:?}", rep.counterexample.map(|c| (c.cell, c.width, c.virtual_width)));
        assert_eq!(rep.checked, 100);
        let rep = verify_width_bound(random_inventory_market, 10, 10, 4, 16, &mut rng).unwrap();
        assert!(rep.passed());
    }
}
