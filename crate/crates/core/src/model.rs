//! The static principal-agent model.
//!
//! Outcomes are indexed `0..=m` in non-decreasing order of requester value,
//! with `0` the null outcome (task not done). Contracts are monotone and stored
//! in increment form: `increments[j]` is `x(j+1) - x(j)`. A worker type is a
//! cost per effort level plus a row-stochastic production matrix; effort `0` is
//! the null effort and is the only way to reach the null outcome.

use std::cmp::Ordering;
use std::ops::Add;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, TypeViolation};
use crate::scalar::Scalar;

/// Requester values `v(0..=m)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeSpace<S> {
    values: Vec<S>,
}

impl<S: Scalar> OutcomeSpace<S> {
    pub fn new(values: Vec<S>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::OutcomeSpace("need the null outcome and at least one more".into()));
        }
        if values[0] != S::zero() {
            return Err(Error::OutcomeSpace("null outcome must have value 0".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < S::zero() || *v > S::one()) {
            return Err(Error::OutcomeSpace("values must lie in [0,1]".into()));
        }
        if values.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::OutcomeSpace("values must be non-decreasing".into()));
        }
        Ok(Self { values })
    }

    /// Number of non-null outcomes.
    pub fn m(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn value(&self, outcome: usize) -> S {
        self.values[outcome]
    }
}

/// A monotone contract in increment representation.
///
/// Payments `x(0..=m)` are kept alongside the increments since every oracle
/// call needs them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<S>", into = "Vec<S>")]
pub struct Contract<S: Scalar> {
    increments: Vec<S>,
    payments: Vec<S>,
}

impl<S: Scalar> Contract<S> {
    /// Weakly bounded contract: every increment in `[0,1]`.
    pub fn new(increments: Vec<S>) -> Result<Self> {
        if increments.is_empty() {
            return Err(Error::Contract("at least one increment required".into()));
        }
        if let Some(w) = increments
            .iter()
            .find(|w| !w.is_finite() || **w < S::zero() || **w > S::one())
        {
            return Err(Error::Contract(format!("increment {w} outside [0,1]")));
        }
        Ok(Self::from_increments_unchecked(increments))
    }

    pub(crate) fn from_increments_unchecked(increments: Vec<S>) -> Self {
        let mut payments = Vec::with_capacity(increments.len() + 1);
        let mut acc = S::zero();
        payments.push(acc);
        for &w in &increments {
            acc = acc + w;
            payments.push(acc);
        }
        Self { increments, payments }
    }

    /// The zero contract over `m` non-null outcomes.
    pub fn zero(m: usize) -> Self {
        Self::from_increments_unchecked(vec![S::zero(); m])
    }

    /// Builds a contract from payments `x(1..=m)` (the null payment is implicit).
    pub fn from_payments(payments: &[S]) -> Result<Self> {
        let mut prev = S::zero();
        let mut incs = Vec::with_capacity(payments.len());
        for &x in payments {
            incs.push(x - prev);
            prev = x;
        }
        Self::new(incs)
    }

    pub fn dim(&self) -> usize {
        self.increments.len()
    }

    pub fn increments(&self) -> &[S] {
        &self.increments
    }

    /// Payments `x(0..=m)`, with `x(0) = 0`.
    pub fn payments(&self) -> &[S] {
        &self.payments
    }

    /// Bounded iff all payments lie in `[0,1]`, i.e. the increments sum to at most one.
    pub fn is_bounded(&self) -> bool {
        *self.payments.last().unwrap() <= S::one() + S::tie_band()
    }

    /// Pointwise dominance of increments.
    pub fn dominates(&self, other: &Self) -> bool {
        dominates(self, other)
    }
}

impl<S: Scalar> TryFrom<Vec<S>> for Contract<S> {
    type Error = Error;

    fn try_from(v: Vec<S>) -> Result<Self> {
        Self::new(v)
    }
}

impl<S: Scalar> From<Contract<S>> for Vec<S> {
    fn from(c: Contract<S>) -> Self {
        c.increments
    }
}

/// True iff every increment of `a` is at least the matching increment of `b`.
pub fn dominates<S: Scalar>(a: &Contract<S>, b: &Contract<S>) -> bool {
    assert_eq!(a.dim(), b.dim(), "contracts over different outcome spaces");
    a.increments.iter().zip(&b.increments).all(|(x, y)| x >= y)
}

/// Result of comparing two effort levels by first-order stochastic dominance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fosd {
    FirstDominates,
    SecondDominates,
    Equal,
    Incomparable,
}

/// Expected requester value, payment and utility.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UtilityBreakdown<S> {
    pub value: S,
    pub payment: S,
    pub utility: S,
}

impl<S: Scalar> UtilityBreakdown<S> {
    pub fn new(value: S, payment: S) -> Self {
        Self { value, payment, utility: value - payment }
    }

    pub fn zero() -> Self {
        Self::new(S::zero(), S::zero())
    }

    pub fn scale(self, w: S) -> Self {
        Self::new(self.value * w, self.payment * w)
    }
}

impl<S: Scalar> Add for UtilityBreakdown<S> {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self::new(self.value + rhs.value, self.payment + rhs.payment)
    }
}

/// Cost function, production function and tie-break priority of one worker type.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkerType<S> {
    costs: Vec<S>,
    production: Vec<Vec<S>>,
    /// Effort levels from most to least preferred when tied.
    priority: Vec<usize>,
}

impl<S: Scalar> WorkerType<S> {
    /// Builds and validates a type. Without an explicit tie-break order, efforts
    /// are ranked by how many other efforts they dominate (dominant first).
    pub fn new(
        costs: Vec<S>,
        production: Vec<Vec<S>>,
        tiebreak: Option<Vec<usize>>,
    ) -> Result<Self, TypeViolation> {
        let ty = Self::new_unchecked(costs, production, tiebreak);
        ty.validate()?;
        Ok(ty)
    }

    /// Builds a type without checking the model assumptions.
    pub fn new_unchecked(
        costs: Vec<S>,
        production: Vec<Vec<S>>,
        tiebreak: Option<Vec<usize>>,
    ) -> Self {
        let mut ty = Self { costs, production, priority: Vec::new() };
        ty.priority = match tiebreak {
            Some(order) => order,
            None => ty.dominance_order(),
        };
        ty
    }

    /// The high-low worker: efforts (null, low, high), outcomes (null, low, high).
    /// Low effort is free and always yields the low outcome; high effort costs
    /// `cost_high` and yields the high outcome with probability `theta_high`.
    pub fn high_low(cost_high: S, theta_high: S) -> Result<Self, TypeViolation> {
        let (z, o) = (S::zero(), S::one());
        Self::new(
            vec![z, z, cost_high],
            vec![vec![o, z, z], vec![z, o, z], vec![z, o - theta_high, theta_high]],
            Some(vec![2, 1, 0]),
        )
    }

    /// Single non-null effort with deterministic success: the task-pricing worker.
    pub fn accept_reject(cost: S) -> Result<Self, TypeViolation> {
        let (z, o) = (S::zero(), S::one());
        Self::new(vec![z, cost], vec![vec![o, z], vec![z, o]], Some(vec![1, 0]))
    }

    pub fn effort_count(&self) -> usize {
        self.costs.len()
    }

    /// Number of non-null outcomes this type is defined over.
    pub fn m(&self) -> usize {
        self.production.first().map_or(0, |r| r.len().saturating_sub(1))
    }

    pub fn costs(&self) -> &[S] {
        &self.costs
    }

    pub fn production(&self) -> &[Vec<S>] {
        &self.production
    }

    pub fn row(&self, effort: usize) -> &[S] {
        &self.production[effort]
    }

    pub fn tiebreak_order(&self) -> &[usize] {
        &self.priority
    }

    /// Upper cumulative row `F(π|e) = Σ_{π' ≥ π} f(π'|e)` for `π = 0..=m`.
    pub fn upper_cumulative(&self, effort: usize) -> Vec<S> {
        let row = &self.production[effort];
        let mut out = vec![S::zero(); row.len()];
        let mut acc = S::zero();
        for (k, &p) in row.iter().enumerate().rev() {
            acc = acc + p;
            out[k] = acc;
        }
        out
    }

    pub fn fosd_compare(&self, e: usize, e2: usize) -> Fosd {
        let a = self.upper_cumulative(e);
        let b = self.upper_cumulative(e2);
        let tol = S::prob_tol();
        let (mut a_strict, mut b_strict) = (false, false);
        for (x, y) in a.iter().zip(&b) {
            if *x > *y + tol {
                a_strict = true;
            } else if *y > *x + tol {
                b_strict = true;
            }
        }
        match (a_strict, b_strict) {
            (false, false) => Fosd::Equal,
            (true, false) => Fosd::FirstDominates,
            (false, true) => Fosd::SecondDominates,
            (true, true) => Fosd::Incomparable,
        }
    }

    fn dominance_order(&self) -> Vec<usize> {
        let n = self.costs.len();
        if self.production.len() != n {
            return (0..n).rev().collect();
        }
        let score = |e: usize| {
            (0..n)
                .filter(|&o| o != e && self.fosd_compare(e, o) == Fosd::FirstDominates)
                .count()
        };
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| score(b).cmp(&score(a)).then(b.cmp(&a)));
        order
    }

    /// Checks the model invariants, reporting the first violation found.
    pub fn validate(&self) -> Result<(), TypeViolation> {
        let n = self.costs.len();
        if n == 0 || self.production.is_empty() {
            return Err(TypeViolation::NoEfforts);
        }
        if self.production.len() != n {
            return Err(TypeViolation::CostCount { costs: n, efforts: self.production.len() });
        }
        let width = self.production[0].len();
        for (e, row) in self.production.iter().enumerate() {
            if row.len() != width || width < 2 {
                return Err(TypeViolation::RowLength { effort: e, got: row.len(), expected: width.max(2) });
            }
        }
        for (e, c) in self.costs.iter().enumerate() {
            if !c.is_finite() || *c < S::zero() {
                return Err(TypeViolation::BadCost { effort: e });
            }
        }
        if self.costs[0] != S::zero() {
            return Err(TypeViolation::NullEffortCost);
        }
        for (e, row) in self.production.iter().enumerate() {
            let total: S = row.iter().copied().sum();
            if row.iter().any(|p| !p.is_finite() || *p < S::zero())
                || (total - S::one()).abs() > S::prob_tol()
            {
                return Err(TypeViolation::RowNotProbability { effort: e });
            }
        }
        if self.production[0][0] != S::one() {
            return Err(TypeViolation::NullEffortNotNull);
        }
        for e in 1..n {
            if self.production[e][0] != S::zero() {
                return Err(TypeViolation::NullOutcomeReachable { effort: e });
            }
        }
        for e in 0..n {
            for e2 in e + 1..n {
                match self.fosd_compare(e, e2) {
                    Fosd::FirstDominates | Fosd::SecondDominates => {}
                    _ => return Err(TypeViolation::FosdFails(e, e2)),
                }
            }
        }
        let mut seen = vec![false; n];
        if self.priority.len() != n {
            return Err(TypeViolation::BadTiebreak);
        }
        for &e in &self.priority {
            if e >= n || std::mem::replace(&mut seen[e], true) {
                return Err(TypeViolation::BadTiebreak);
            }
        }
        Ok(())
    }

    /// Worker's expected payoff `Σ_π x(π) f(π|e) − c(e)` under payments `x(0..=m)`.
    pub fn worker_payoff(&self, payments: &[S], effort: usize) -> S {
        dot(payments, &self.production[effort]) - self.costs[effort]
    }

    /// Utility-maximising effort under arbitrary (not necessarily monotone)
    /// payments `x(0..=m)`. Payoffs within the tie band of the maximum count as
    /// tied and the highest-priority effort among them wins.
    pub fn best_response_payments(&self, payments: &[S]) -> usize {
        debug_assert_eq!(payments.len(), self.m() + 1);
        let payoffs: Vec<S> = (0..self.effort_count())
            .map(|e| self.worker_payoff(payments, e))
            .collect();
        let best = payoffs.iter().copied().fold(S::neg_infinity(), S::max);
        let band = S::tie_band();
        *self
            .priority
            .iter()
            .find(|&&e| payoffs[e] >= best - band)
            .expect("priority covers every effort")
    }

    pub fn best_response(&self, contract: &Contract<S>) -> usize {
        self.best_response_payments(contract.payments())
    }

    /// Exact expected value/payment/utility under best response to `payments`.
    pub fn breakdown_payments(&self, outcomes: &OutcomeSpace<S>, payments: &[S]) -> UtilityBreakdown<S> {
        let e = self.best_response_payments(payments);
        let row = &self.production[e];
        UtilityBreakdown::new(dot(outcomes.values(), row), dot(payments, row))
    }

    pub fn expected_breakdown(&self, outcomes: &OutcomeSpace<S>, contract: &Contract<S>) -> UtilityBreakdown<S> {
        self.breakdown_payments(outcomes, contract.payments())
    }

    /// Draws an outcome from the production row of `effort`.
    pub fn sample_from_effort<R: Rng + ?Sized>(&self, effort: usize, rng: &mut R) -> usize {
        sample_index(&self.production[effort], rng)
    }

    /// Best-responds to `contract`, then draws the realised outcome.
    pub fn sample_outcome<R: Rng + ?Sized>(&self, contract: &Contract<S>, rng: &mut R) -> usize {
        let e = self.best_response(contract);
        self.sample_from_effort(e, rng)
    }
}

pub(crate) fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).fold(S::zero(), |acc, (x, y)| acc + *x * *y)
}

/// Inverse-CDF draw from a probability vector. Always consumes exactly one
/// uniform variate so that streams stay aligned across environments.
pub(crate) fn sample_index<S: Scalar, R: Rng + ?Sized>(probs: &[S], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (k, p) in probs.iter().enumerate() {
        let p = p.as_f64();
        if p > 0.0 {
            last_positive = k;
            acc += p;
            if u < acc {
                return k;
            }
        }
    }
    last_positive
}

/// Lexicographic comparison of scalar slices (NaN-free inputs).
pub(crate) fn lex_cmp<S: Scalar>(a: &[S], b: &[S]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    a.len().cmp(&b.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn hl() -> WorkerType<f64> {
        WorkerType::high_low(0.3, 0.8).unwrap()
    }

    fn hl_values() -> OutcomeSpace<f64> {
        OutcomeSpace::new(vec![0.0, 0.0, 1.0]).unwrap()
    }

    fn price(low: f64, high: f64) -> Contract<f64> {
        Contract::from_payments(&[low, high]).unwrap()
    }

    #[test]
    fn outcome_space_rejects_bad_values() {
        assert!(OutcomeSpace::new(vec![0.1, 0.5]).is_err());
        assert!(OutcomeSpace::new(vec![0.0, 0.6, 0.5]).is_err());
        assert!(OutcomeSpace::new(vec![0.0, 1.5]).is_err());
        assert!(OutcomeSpace::new(vec![0.0]).is_err());
        assert_eq!(OutcomeSpace::new(vec![0.0, 0.3, 1.0]).unwrap().m(), 2);
    }

    #[test]
    fn contract_payments_and_bounds() {
        let c = Contract::new(vec![0.25, 0.5]).unwrap();
        assert_eq!(c.payments(), &[0.0, 0.25, 0.75]);
        assert!(c.is_bounded());
        let weak = Contract::new(vec![0.75, 0.75]).unwrap();
        assert!(!weak.is_bounded());
        assert!(Contract::new(vec![-0.1]).is_err());
        assert!(Contract::new(vec![1.1]).is_err());
        assert!(Contract::<f64>::from_payments(&[0.5, 0.2]).is_err());
    }

    #[test]
    fn dominance_examples() {
        let a = Contract::new(vec![0.5, 0.5]).unwrap();
        let b = Contract::new(vec![0.25, 0.5]).unwrap();
        let c = Contract::new(vec![0.5, 0.1]).unwrap();
        assert!(dominates(&a, &b));
        assert!(dominates(&a, &a));
        assert!(!dominates(&c, &b));
    }

    #[test]
    fn fosd_compare_examples() {
        let t = hl();
        assert_eq!(t.fosd_compare(2, 1), Fosd::FirstDominates);
        assert_eq!(t.fosd_compare(1, 2), Fosd::SecondDominates);
        assert_eq!(t.fosd_compare(1, 1), Fosd::Equal);
        // rows (0,.5,0,.5) vs (0,0,1,0): upper cumulatives (1,1,.5,.5) vs (1,1,1,0) cross
        let crossing = WorkerType::new_unchecked(
            vec![0.0, 0.1, 0.2],
            vec![
                vec![1.0, 0.0, 0.0, 0.0],
                vec![0.0, 0.5, 0.0, 0.5],
                vec![0.0, 0.0, 1.0, 0.0],
            ],
            None,
        );
        assert_eq!(crossing.fosd_compare(1, 2), Fosd::Incomparable);
        assert_eq!(crossing.validate(), Err(TypeViolation::FosdFails(1, 2)));
    }

    #[test]
    fn validate_reports_first_violation() {
        assert!(hl().validate().is_ok());
        let leaky = WorkerType::new_unchecked(
            vec![0.0, 0.1],
            vec![vec![1.0, 0.0], vec![0.1, 0.9]],
            None,
        );
        assert_eq!(leaky.validate(), Err(TypeViolation::NullOutcomeReachable { effort: 1 }));
        let not_prob = WorkerType::new_unchecked(
            vec![0.0, 0.1],
            vec![vec![1.0, 0.0], vec![0.0, 0.9]],
            None,
        );
        assert_eq!(not_prob.validate(), Err(TypeViolation::RowNotProbability { effort: 1 }));
        let bad_order = WorkerType::new_unchecked(
            vec![0.0, 0.1],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            Some(vec![1, 1]),
        );
        assert_eq!(bad_order.validate(), Err(TypeViolation::BadTiebreak));
        let costly_null = WorkerType::new_unchecked(
            vec![0.1, 0.1],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            None,
        );
        assert_eq!(costly_null.validate(), Err(TypeViolation::NullEffortCost));
    }

    #[test]
    fn default_tiebreak_prefers_dominant_efforts() {
        let t = WorkerType::new(
            vec![0.0, 0.0, 0.3],
            vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.2, 0.8]],
            None,
        )
        .unwrap();
        assert_eq!(t.tiebreak_order(), &[2, 1, 0]);
    }

    #[test]
    fn best_response_threshold() {
        let t = hl();
        // c_h / θ_h = 0.375
        assert_eq!(t.best_response(&price(0.0, 0.5)), 2);
        assert_eq!(t.best_response(&price(0.0, 0.3)), 1);
        assert_eq!(t.best_response(&Contract::zero(2)), 1);
        // exactly at the threshold the tie goes to high effort
        assert_eq!(t.best_response(&price(0.0, 0.375)), 2);
    }

    #[test]
    fn breakdown_examples() {
        let t = hl();
        let v = hl_values();
        let b = t.expected_breakdown(&v, &price(0.0, 0.5));
        assert!((b.value - 0.8).abs() < 1e-12);
        assert!((b.payment - 0.4).abs() < 1e-12);
        assert!((b.utility - 0.4).abs() < 1e-12);
        let b = t.expected_breakdown(&v, &price(0.0, 0.3));
        assert_eq!(b, UtilityBreakdown::zero());
        let null_only = WorkerType::new(vec![0.0, 0.5], vec![vec![1.0, 0.0], vec![0.0, 1.0]], None).unwrap();
        let b = null_only.expected_breakdown(&OutcomeSpace::new(vec![0.0, 1.0]).unwrap(), &Contract::zero(1));
        assert_eq!(b, UtilityBreakdown::zero());
    }

    #[test]
    fn breakdown_in_single_precision() {
        let t = WorkerType::<f32>::high_low(0.3, 0.8).unwrap();
        let v = OutcomeSpace::new(vec![0.0f32, 0.0, 1.0]).unwrap();
        let b = t.expected_breakdown(&v, &Contract::from_payments(&[0.0f32, 0.5]).unwrap());
        assert!((b.utility - 0.4).abs() < 1e-6);
    }

    #[test]
    fn sampling_follows_best_response_row() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let det = WorkerType::new(
            vec![0.0, 0.0],
            vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]],
            None,
        )
        .unwrap();
        let c = Contract::zero(2);
        assert!((0..100).all(|_| det.sample_outcome(&c, &mut rng) == 2));

        let t = hl();
        let n = 100_000;
        let highs = (0..n)
            .filter(|_| t.sample_outcome(&price(0.0, 0.5), &mut rng) == 2)
            .count();
        let freq = highs as f64 / n as f64;
        assert!((freq - 0.8).abs() < 0.01, "freq {freq}");

        let shy = WorkerType::new(vec![0.0, 0.5], vec![vec![1.0, 0.0], vec![0.0, 1.0]], None).unwrap();
        assert!((0..100).all(|_| shy.sample_outcome(&Contract::zero(1), &mut rng) == 0));
    }
}
