//! Supply distributions and round-by-round market simulation.
//!
//! A [`Market`] pairs requester values with a [`SupplyModel`]. Each model has
//! both a sampler ([`Environment::play_round`]) and an exact expectation oracle
//! ([`Environment::exact_breakdown`]). Algorithms only get to see the
//! [`Observation`] part of a round; the worker's type and effort stay hidden.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::curve::{integrate, Monotonicity, PiecewiseLinear};
use crate::error::{Error, Result};
use crate::model::{sample_index, Contract, OutcomeSpace, UtilityBreakdown, WorkerType};
use crate::scalar::Scalar;

/// Absolute tolerance of the quadrature used for random-θ high-low markets.
pub const QUADRATURE_TOL: f64 = 1e-8;

/// Requester-visible result of one round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation<S> {
    pub outcome: usize,
    pub value: S,
    pub payment: S,
    pub utility: S,
}

impl<S: Scalar> Observation<S> {
    pub fn new(outcome: usize, value: S, payment: S) -> Self {
        Self { outcome, value, payment, utility: value - payment }
    }
}

/// Worker-side facts of a round that algorithms must not read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HiddenDraw {
    /// Index into a finite mixture; `None` for continuous supply models.
    pub type_id: Option<usize>,
    pub effort: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundOutcome<S> {
    observation: Observation<S>,
    hidden: HiddenDraw,
}

impl<S: Copy> RoundOutcome<S> {
    pub fn observation(&self) -> Observation<S> {
        self.observation
    }

    /// Debug telemetry: sampled type and chosen effort.
    pub fn hidden(&self) -> HiddenDraw {
        self.hidden
    }
}

/// Anything a bandit algorithm can post contracts to.
pub trait Environment<S: Scalar>: Send + Sync {
    /// Number of non-null outcomes (the contract dimension).
    fn dim(&self) -> usize;

    /// Samples a worker, lets it best-respond and samples the outcome.
    fn play_round<R: Rng + ?Sized>(&self, contract: &Contract<S>, rng: &mut R) -> RoundOutcome<S>;

    /// Expected value, payment and utility of `contract`, without sampling.
    fn exact_breakdown(&self, contract: &Contract<S>) -> Result<UtilityBreakdown<S>>;

    fn observe<R: Rng + ?Sized>(&self, contract: &Contract<S>, rng: &mut R) -> Observation<S> {
        self.play_round(contract, rng).observation()
    }

    fn exact_utility(&self, contract: &Contract<S>) -> Result<S> {
        Ok(self.exact_breakdown(contract)?.utility)
    }
}

/// Distribution of the high-effort success probability in a high-low market.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ThetaLaw<S> {
    Fixed(S),
    Uniform { lo: S, hi: S },
}

#[derive(Debug, Clone, PartialEq)]
pub enum SupplyModel<S> {
    /// Finitely many worker types with probabilities `weights`.
    FiniteMixture { types: Vec<WorkerType<S>>, weights: Vec<S> },
    /// High-low workers with cost `c_h ~ cost_cdf` and independent `θ_h ~ theta`.
    HighLowParametric { cost_cdf: PiecewiseLinear<S>, theta: ThetaLaw<S> },
    /// One non-null outcome; `accept(p)` is the probability a worker takes price `p`.
    TaskPricingCurve { accept: PiecewiseLinear<S> },
    /// Selling: a buyer arrives and buys at price `p` with probability `sale(p)`.
    InventoryDemand { sale: PiecewiseLinear<S> },
}

/// A supply model together with the requester's values.
#[derive(Debug, Clone, PartialEq)]
pub struct Market<S> {
    outcomes: OutcomeSpace<S>,
    supply: SupplyModel<S>,
}

impl<S: Scalar> Market<S> {
    pub fn new(outcomes: OutcomeSpace<S>, supply: SupplyModel<S>) -> Result<Self> {
        let m = outcomes.m();
        match &supply {
            SupplyModel::FiniteMixture { types, weights } => {
                if types.is_empty() || types.len() != weights.len() {
                    return Err(Error::Supply("mixture needs one weight per type".into()));
                }
                if weights.iter().any(|w| !w.is_finite() || *w < S::zero()) {
                    return Err(Error::Supply("mixture weights must be non-negative".into()));
                }
                let total: S = weights.iter().copied().sum();
                if (total - S::one()).abs() > S::prob_tol() {
                    return Err(Error::Supply(format!("mixture weights sum to {total}")));
                }
                for t in types {
                    t.validate()?;
                    if t.m() != m {
                        return Err(Error::Supply(format!(
                            "type over {} outcomes in a market with {m}",
                            t.m()
                        )));
                    }
                }
            }
            SupplyModel::HighLowParametric { cost_cdf, theta } => {
                if m != 2 {
                    return Err(Error::Supply("high-low markets have two non-null outcomes".into()));
                }
                if !cost_cdf.is(Monotonicity::NonDecreasing) {
                    return Err(Error::Supply("cost CDF must be non-decreasing".into()));
                }
                let ok = match theta {
                    ThetaLaw::Fixed(t) => *t > S::zero() && *t <= S::one(),
                    ThetaLaw::Uniform { lo, hi } => *lo > S::zero() && lo < hi && *hi <= S::one(),
                };
                if !ok {
                    return Err(Error::Supply("θ_h must lie in (0,1]".into()));
                }
            }
            SupplyModel::TaskPricingCurve { accept } => {
                if m != 1 {
                    return Err(Error::Supply("task pricing has one non-null outcome".into()));
                }
                if !accept.is(Monotonicity::NonDecreasing) {
                    return Err(Error::Supply("acceptance curve must be non-decreasing".into()));
                }
            }
            SupplyModel::InventoryDemand { sale } => {
                if m != 1 {
                    return Err(Error::Supply("inventory pricing has one non-null outcome".into()));
                }
                if !sale.is(Monotonicity::NonIncreasing) {
                    return Err(Error::Supply("demand curve must be non-increasing".into()));
                }
            }
        }
        Ok(Self { outcomes, supply })
    }

    pub fn outcomes(&self) -> &OutcomeSpace<S> {
        &self.outcomes
    }

    pub fn supply(&self) -> &SupplyModel<S> {
        &self.supply
    }

    pub fn is_inventory(&self) -> bool {
        matches!(self.supply, SupplyModel::InventoryDemand { .. })
    }

    fn check_dim(&self, contract: &Contract<S>) -> Result<()> {
        if contract.dim() != self.outcomes.m() {
            return Err(Error::DimensionMismatch { got: contract.dim(), expected: self.outcomes.m() });
        }
        Ok(())
    }

    /// High-low markets: probability of the high outcome at increment `p`,
    /// `S(p) = E[θ_h · 1{c_h ≤ θ_h p}]`.
    pub fn high_outcome_probability(&self, p: S) -> Option<S> {
        match &self.supply {
            SupplyModel::HighLowParametric { cost_cdf, theta } => Some(match theta {
                ThetaLaw::Fixed(t) => *t * cost_cdf.eval(*t * p),
                ThetaLaw::Uniform { lo, hi } => {
                    let f = |th: S| th * cost_cdf.eval(th * p);
                    integrate(f, *lo, *hi, S::lit(QUADRATURE_TOL)) / (*hi - *lo)
                }
            }),
            _ => None,
        }
    }

    /// Probability that the realised outcome is non-null (a sale, an accepted task).
    pub fn success_probability(&self, contract: &Contract<S>) -> Result<S> {
        self.check_dim(contract)?;
        Ok(match &self.supply {
            SupplyModel::FiniteMixture { types, weights } => types
                .iter()
                .zip(weights)
                .map(|(t, w)| *w * (S::one() - t.row(t.best_response(contract))[0]))
                .sum(),
            SupplyModel::HighLowParametric { .. } => S::one(),
            SupplyModel::TaskPricingCurve { accept } => accept.eval(contract.increments()[0]),
            SupplyModel::InventoryDemand { sale } => sale.eval(contract.increments()[0]),
        })
    }

    /// Exact oracle for arbitrary non-negative payments `x(0..=m)`, monotone or
    /// not. Only finite mixtures support non-monotone payments.
    pub fn breakdown_for_payments(&self, payments: &[S]) -> Result<UtilityBreakdown<S>> {
        match &self.supply {
            SupplyModel::FiniteMixture { types, weights } => {
                if payments.len() != self.outcomes.m() + 1 {
                    return Err(Error::DimensionMismatch {
                        got: payments.len().saturating_sub(1),
                        expected: self.outcomes.m(),
                    });
                }
                Ok(types
                    .iter()
                    .zip(weights)
                    .map(|(t, w)| t.breakdown_payments(&self.outcomes, payments).scale(*w))
                    .fold(UtilityBreakdown::zero(), |a, b| a + b))
            }
            _ => Err(Error::Supply("payment-vector oracle needs a finite mixture".into())),
        }
    }
}

impl<S: Scalar> Environment<S> for Market<S> {
    fn dim(&self) -> usize {
        self.outcomes.m()
    }

    fn play_round<R: Rng + ?Sized>(&self, contract: &Contract<S>, rng: &mut R) -> RoundOutcome<S> {
        debug_assert_eq!(contract.dim(), self.outcomes.m());
        let pay = contract.payments();
        let v = self.outcomes.values();
        match &self.supply {
            SupplyModel::FiniteMixture { types, weights } => {
                let id = sample_index(weights, rng);
                let ty = &types[id];
                let effort = ty.best_response(contract);
                let outcome = ty.sample_from_effort(effort, rng);
                RoundOutcome {
                    observation: Observation::new(outcome, v[outcome], pay[outcome]),
                    hidden: HiddenDraw { type_id: Some(id), effort },
                }
            }
            SupplyModel::HighLowParametric { cost_cdf, theta } => {
                let cost = cost_cdf.inverse(S::lit(rng.random::<f64>()));
                let th = match theta {
                    ThetaLaw::Fixed(t) => *t,
                    ThetaLaw::Uniform { lo, hi } => *lo + (*hi - *lo) * S::lit(rng.random::<f64>()),
                };
                let p = contract.increments()[1];
                // high pays θp − c on top of the base payment; ties go to high
                let high = th * p - cost >= -S::tie_band();
                let u: f64 = rng.random();
                let outcome = if high && u < th.as_f64() { 2 } else { 1 };
                RoundOutcome {
                    observation: Observation::new(outcome, v[outcome], pay[outcome]),
                    hidden: HiddenDraw { type_id: None, effort: if high { 2 } else { 1 } },
                }
            }
            SupplyModel::TaskPricingCurve { accept } => {
                let u: f64 = rng.random();
                let outcome = usize::from(u < accept.eval(pay[1]).as_f64());
                RoundOutcome {
                    observation: Observation::new(outcome, v[outcome], pay[outcome]),
                    hidden: HiddenDraw { type_id: None, effort: outcome },
                }
            }
            SupplyModel::InventoryDemand { sale } => {
                let u: f64 = rng.random();
                let outcome = usize::from(u < sale.eval(pay[1]).as_f64());
                let revenue = if outcome == 1 { pay[1] } else { S::zero() };
                RoundOutcome {
                    observation: Observation::new(outcome, revenue, S::zero()),
                    hidden: HiddenDraw { type_id: None, effort: outcome },
                }
            }
        }
    }

    fn exact_breakdown(&self, contract: &Contract<S>) -> Result<UtilityBreakdown<S>> {
        self.check_dim(contract)?;
        let v = self.outcomes.values();
        Ok(match &self.supply {
            SupplyModel::FiniteMixture { types, weights } => types
                .iter()
                .zip(weights)
                .map(|(t, w)| t.expected_breakdown(&self.outcomes, contract).scale(*w))
                .fold(UtilityBreakdown::zero(), |a, b| a + b),
            SupplyModel::HighLowParametric { .. } => {
                let (b, p) = (contract.increments()[0], contract.increments()[1]);
                let s = self.high_outcome_probability(p).expect("high-low market");
                UtilityBreakdown::new(v[1] + s * (v[2] - v[1]), b + p * s)
            }
            SupplyModel::TaskPricingCurve { accept } => {
                let p = contract.increments()[0];
                let s = accept.eval(p);
                UtilityBreakdown::new(s * v[1], s * p)
            }
            SupplyModel::InventoryDemand { sale } => {
                let p = contract.increments()[0];
                UtilityBreakdown::new(p * sale.eval(p), S::zero())
            }
        })
    }
}

/// Requester values of the simulation markets: `v(low) = 0.3`, `v(high) = 1`.
pub const SIM_VALUES: [f64; 3] = [0.0, 0.3, 1.0];
/// High-effort success probability of the simulation markets.
pub const SIM_THETA: f64 = 0.8;

fn sim_values<S: Scalar>() -> OutcomeSpace<S> {
    OutcomeSpace::new(SIM_VALUES.iter().map(|&v| S::lit(v)).collect()).expect("static values")
}

fn check_cost<S: Scalar>(c: S) -> Result<()> {
    if !(c >= S::zero() && c <= S::one()) {
        return Err(Error::Supply(format!("cost {c} outside [0,1]")));
    }
    Ok(())
}

/// High-low market with a continuous cost law and `v(low)`, `v(high)` given.
pub fn make_high_low_market<S: Scalar>(
    cost_cdf: PiecewiseLinear<S>,
    theta: ThetaLaw<S>,
    value_low: S,
    value_high: S,
) -> Result<Market<S>> {
    let outcomes = OutcomeSpace::new(vec![S::zero(), value_low, value_high])?;
    Market::new(outcomes, SupplyModel::HighLowParametric { cost_cdf, theta })
}

/// Finite mixture of high-low workers `(c_h, θ_h)` with the given weights.
pub fn make_high_low_mixture<S: Scalar>(
    workers: &[(S, S)],
    weights: Vec<S>,
    value_low: S,
    value_high: S,
) -> Result<Market<S>> {
    let types = workers
        .iter()
        .map(|&(c, th)| WorkerType::high_low(c, th))
        .collect::<Result<Vec<_>, _>>()?;
    let outcomes = OutcomeSpace::new(vec![S::zero(), value_low, value_high])?;
    Market::new(outcomes, SupplyModel::FiniteMixture { types, weights })
}

/// Uniform Worker Market: `c_h ~ U[0,1]`.
pub fn make_uniform_market<S: Scalar>() -> Market<S> {
    Market::new(
        sim_values(),
        SupplyModel::HighLowParametric {
            cost_cdf: PiecewiseLinear::identity(),
            theta: ThetaLaw::Fixed(S::lit(SIM_THETA)),
        },
    )
    .expect("static market")
}

/// Homogeneous Worker Market: every worker has cost `c_h`.
pub fn make_homogeneous_market<S: Scalar>(c_h: S) -> Result<Market<S>> {
    check_cost(c_h)?;
    let v = SIM_VALUES.map(S::lit);
    make_high_low_mixture(&[(c_h, S::lit(SIM_THETA))], vec![S::one()], v[1], v[2])
}

/// Two-Type Market: `c_h` is one of two values with equal probability.
pub fn make_two_type_market<S: Scalar>(c_h1: S, c_h2: S) -> Result<Market<S>> {
    check_cost(c_h1)?;
    check_cost(c_h2)?;
    let v = SIM_VALUES.map(S::lit);
    let th = S::lit(SIM_THETA);
    let half = S::lit(0.5);
    make_high_low_mixture(&[(c_h1, th), (c_h2, th)], vec![half, half], v[1], v[2])
}

/// Task pricing with acceptance probability `accept(p)` and value `v`.
pub fn make_taskpricing<S: Scalar>(accept: PiecewiseLinear<S>, value: S) -> Result<Market<S>> {
    let outcomes = OutcomeSpace::new(vec![S::zero(), value])?;
    Market::new(outcomes, SupplyModel::TaskPricingCurve { accept })
}

/// Task pricing whose costs are piecewise uniform: density `densities[i]` on
/// `[breakpoints[i], breakpoints[i+1]]`. Densities must lie in `[1/λ, λ]`.
pub fn make_piecewise_uniform_taskpricing<S: Scalar>(
    breakpoints: &[S],
    densities: &[S],
    lambda: S,
    value: S,
) -> Result<Market<S>> {
    if breakpoints.len() != densities.len() + 1 || densities.is_empty() {
        return Err(Error::Supply("need k densities and k+1 breakpoints".into()));
    }
    if breakpoints[0] != S::zero() || *breakpoints.last().unwrap() != S::one() {
        return Err(Error::Supply("breakpoints must span [0,1]".into()));
    }
    if lambda < S::one() {
        return Err(Error::Supply("density bound λ must be at least 1".into()));
    }
    let mut ys = vec![S::zero()];
    let mut mass = S::zero();
    for (w, d) in breakpoints.windows(2).zip(densities) {
        if *d < S::one() / lambda - S::tie_band() || *d > lambda + S::tie_band() {
            return Err(Error::Supply(format!("density {d} outside [1/λ, λ]")));
        }
        mass = mass + (w[1] - w[0]) * *d;
        ys.push(mass);
    }
    if (mass - S::one()).abs() > S::lit(1e-9) {
        return Err(Error::Supply(format!("densities integrate to {mass}, not 1")));
    }
    *ys.last_mut().unwrap() = S::one();
    let ys = ys.into_iter().map(|y| y.min(S::one())).collect();
    let cdf = PiecewiseLinear::monotone(breakpoints.to_vec(), ys, Monotonicity::NonDecreasing)?;
    make_taskpricing(cdf, value)
}

/// The staircase instance on which every uniform mesh of granularity `delta`
/// loses `Ω(δ)`: `U(p) = 1/4` on the comb `[2/5,3/5] ∩ 4δℕ`, one off-comb price
/// `p*` (the comb shifted by `δ/2`, nearest to `1/2`) with `U(p*) = 1/4 + δ/4`,
/// `S(0) = 0`, `S(1) = 1`, linear in between. `v = 1`.
pub fn make_staircase_instance<S: Scalar>(delta: f64) -> Result<(Market<S>, f64)> {
    if !(delta > 0.0 && delta < 0.05) {
        return Err(Error::Supply("staircase needs 0 < δ < 1/20".into()));
    }
    let step = 4.0 * delta;
    let j_lo = (0.4 / step - 1e-9).ceil() as i64;
    let j_hi = (0.6 / step + 1e-9).floor() as i64;
    let comb: Vec<f64> = (j_lo..=j_hi).map(|j| j as f64 * step).collect();
    let p_star = (j_lo - 1..=j_hi)
        .map(|j| j as f64 * step + delta / 2.0)
        .filter(|p| (0.4..=0.6).contains(p))
        .min_by(|a, b| (a - 0.5).abs().total_cmp(&(b - 0.5).abs()))
        .ok_or_else(|| Error::Supply("no off-comb price in [2/5,3/5]".into()))?;
    let mut knots: Vec<(f64, f64)> = comb.iter().map(|&p| (p, 0.25 / (1.0 - p))).collect();
    knots.push((p_star, (0.25 + delta / 4.0) / (1.0 - p_star)));
    knots.push((0.0, 0.0));
    knots.push((1.0, 1.0));
    knots.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (xs, ys): (Vec<S>, Vec<S>) = knots.iter().map(|&(x, y)| (S::lit(x), S::lit(y))).unzip();
    let accept = PiecewiseLinear::monotone(xs, ys, Monotonicity::NonDecreasing)?;
    Ok((make_taskpricing(accept, S::one())?, p_star))
}

/// Single-type instance with `m = 3` whose unique optimal contract is not
/// monotone: low effort gives outcome 1 or 3, high effort gives 2 or 3, each
/// with probability 1/2; low effort is free and high costs `cost_high`.
pub fn make_nonmonotone_example<S: Scalar>(cost_high: S, values: [S; 4]) -> Result<Market<S>> {
    let gap = S::lit(0.5) * (values[2] - values[1]);
    if !(cost_high > S::zero() && cost_high < gap) {
        return Err(Error::Supply(format!("cost_h must lie in (0, {gap})")));
    }
    let (z, o, h) = (S::zero(), S::one(), S::lit(0.5));
    let ty = WorkerType::new(
        vec![z, z, cost_high],
        vec![vec![o, z, z, z], vec![z, h, z, h], vec![z, z, h, h]],
        Some(vec![2, 1, 0]),
    )?;
    Market::new(
        OutcomeSpace::new(values.to_vec())?,
        SupplyModel::FiniteMixture { types: vec![ty], weights: vec![o] },
    )
}

/// Inventory pricing: reward `p · 1{sale}`, sale with probability `demand(p)`.
pub fn make_inventory_env<S: Scalar>(demand: PiecewiseLinear<S>) -> Result<Market<S>> {
    let outcomes = OutcomeSpace::new(vec![S::zero(), S::zero()])?;
    Market::new(outcomes, SupplyModel::InventoryDemand { sale: demand })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(incs: &[f64]) -> Contract<f64> {
        Contract::new(incs.to_vec()).unwrap()
    }

    #[test]
    fn homogeneous_round_support() {
        let m = make_high_low_mixture(&[(0.3, 0.8)], vec![1.0], 0.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 20_000;
        let mut good = 0;
        for _ in 0..n {
            let r = m.play_round(&c(&[0.0, 0.5]), &mut rng).observation();
            assert!(r.utility == 0.5 || r.utility == 0.0);
            assert_eq!(r.utility, r.value - r.payment);
            good += usize::from(r.utility == 0.5);
        }
        let f = good as f64 / n as f64;
        assert!((f - 0.8).abs() < 0.015, "{f}");
    }

    #[test]
    fn null_contract_on_high_low_pays_nothing() {
        let m = make_high_low_mixture(&[(0.3, 0.8), (0.6, 0.5)], vec![0.5, 0.5], 0.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let r = m.play_round(&Contract::zero(2), &mut rng);
            assert_eq!(r.observation().utility, 0.0);
            assert_eq!(r.hidden().effort, 1);
        }
    }

    #[test]
    fn deterministic_round_equals_oracle() {
        let ty = WorkerType::new(vec![0.0, 0.1], vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]], None).unwrap();
        let m = Market::new(
            OutcomeSpace::new(vec![0.0, 0.5, 0.9]).unwrap(),
            SupplyModel::FiniteMixture { types: vec![ty], weights: vec![1.0] },
        )
        .unwrap();
        let x = c(&[0.1, 0.2]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r = m.play_round(&x, &mut rng).observation();
        let e = m.exact_breakdown(&x).unwrap();
        assert_eq!((r.value, r.payment, r.utility), (e.value, e.payment, e.utility));
    }

    #[test]
    fn uniform_cost_closed_form() {
        let m = make_high_low_market::<f64>(PiecewiseLinear::identity(), ThetaLaw::Fixed(0.8), 0.0, 1.0).unwrap();
        // S(p) = 0.8 · Pr[c ≤ 0.8p] = 0.64p
        assert!((m.high_outcome_probability(0.5).unwrap() - 0.32).abs() < 1e-15);
        assert!((m.exact_utility(&c(&[0.0, 0.5])).unwrap() - 0.16).abs() < 1e-12);
    }

    #[test]
    fn random_theta_uses_quadrature() {
        let m = make_high_low_market::<f64>(
            PiecewiseLinear::identity(),
            ThetaLaw::Uniform { lo: 0.5, hi: 1.0 },
            0.0,
            1.0,
        )
        .unwrap();
        // S(p) = 2 ∫_{1/2}^{1} θ·θp dθ = 2p (1 − 1/8)/3 = 7p/12 for p ≤ 1
        let s = m.high_outcome_probability(0.6).unwrap();
        assert!((s - 7.0 * 0.6 / 12.0).abs() < 1e-8);
    }

    #[test]
    fn task_pricing_utility() {
        let m = make_taskpricing(PiecewiseLinear::identity(), 1.0).unwrap();
        assert!((m.exact_utility(&c(&[0.5])).unwrap() - 0.25).abs() < 1e-15);
        assert!(m.exact_utility(&c(&[0.5, 0.1])).is_err());
    }

    #[test]
    fn simulation_markets() {
        let u = make_uniform_market::<f64>();
        assert!((u.exact_utility(&Contract::zero(2)).unwrap() - 0.3).abs() < 1e-15);
        let h = make_homogeneous_market(0.3).unwrap();
        match h.supply() {
            SupplyModel::FiniteMixture { types, weights } => {
                assert_eq!(types.len(), 1);
                assert_eq!(weights, &vec![1.0]);
            }
            _ => panic!("expected mixture"),
        }
        let t = make_two_type_market(0.2, 0.9).unwrap();
        match t.supply() {
            SupplyModel::FiniteMixture { weights, .. } => assert_eq!(weights, &vec![0.5, 0.5]),
            _ => panic!("expected mixture"),
        }
        assert!(make_homogeneous_market(1.5).is_err());
    }

    #[test]
    fn piecewise_uniform_costs() {
        let m = make_piecewise_uniform_taskpricing(&[0.0, 1.0], &[1.0], 1.0, 1.0).unwrap();
        assert!((m.success_probability(&c(&[0.3])).unwrap() - 0.3).abs() < 1e-15);
        let m = make_piecewise_uniform_taskpricing(&[0.0, 0.5, 1.0], &[0.5, 1.5], 4.0, 1.0).unwrap();
        assert!((m.success_probability(&c(&[0.5])).unwrap() - 0.25).abs() < 1e-15);
        assert!((m.success_probability(&c(&[1.0])).unwrap() - 1.0).abs() < 1e-15);
        assert!(make_piecewise_uniform_taskpricing(&[0.0, 0.1, 1.0], &[8.0, 0.2], 4.0, 1.0).is_err());
        assert!(make_piecewise_uniform_taskpricing(&[0.0, 1.0], &[0.9], 4.0, 1.0).is_err());
    }

    #[test]
    fn staircase_instance() {
        let (m, p_star) = make_staircase_instance::<f64>(0.01).unwrap();
        assert!((p_star - 0.485).abs() < 1e-12);
        assert!((m.exact_utility(&c(&[0.4])).unwrap() - 0.25).abs() < 1e-12);
        assert!((m.exact_utility(&c(&[p_star])).unwrap() - 0.2525).abs() < 1e-12);
        assert_eq!(m.exact_utility(&c(&[1.0])).unwrap(), 0.0);
        match m.supply() {
            SupplyModel::TaskPricingCurve { accept } => assert!(accept.is(Monotonicity::NonDecreasing)),
            _ => panic!(),
        }
        assert!(make_staircase_instance::<f64>(0.06).is_err());
    }

    #[test]
    fn nonmonotone_example() {
        let m = make_nonmonotone_example::<f64>(0.2, [0.0, 0.0, 0.6, 1.0]).unwrap();
        // unrestricted: x(1)=x(3)=0, x(2)=0.4 → 0.5(0.6 + 1) − 0.2
        let u = m.breakdown_for_payments(&[0.0, 0.0, 0.4, 0.0]).unwrap().utility;
        assert!((u - 0.6).abs() < 1e-12);
        // zero contract keeps the worker at low effort: 0.5(v(1) + v(3))
        assert!((m.exact_utility(&Contract::zero(3)).unwrap() - 0.5).abs() < 1e-12);
        assert!(make_nonmonotone_example(0.35, [0.0, 0.0, 0.6, 1.0]).is_err());
    }

    #[test]
    fn inventory_rewards() {
        let demand = PiecewiseLinear::monotone(vec![0.0, 1.0], vec![1.0, 0.0], Monotonicity::NonIncreasing).unwrap();
        let m = make_inventory_env(demand).unwrap();
        assert!((m.exact_utility(&c(&[0.5])).unwrap() - 0.25).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            assert_eq!(m.observe(&c(&[0.0]), &mut rng).utility, 0.0);
            assert_eq!(m.observe(&c(&[1.0]), &mut rng).utility, 0.0);
        }
        let rising = PiecewiseLinear::<f64>::identity();
        assert!(make_inventory_env(rising).is_err());
    }
}
