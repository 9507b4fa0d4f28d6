//! JSON description of markets.
//!
//! Either an explicit finite mixture of worker types:
//!
//! ```json
//! {"values": [0, 0.3, 1],
//!  "types": [{"weight": 1, "costs": [0, 0, 0.2],
//!             "production": [[1,0,0],[0,1,0],[0,0.2,0.8]]}]}
//! ```
//!
//! or one of the named families, tagged by `"market"`:
//! `uniform`, `homogeneous`, `two_type`, `taskpricing`, `staircase`, `inventory`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::curve::{Monotonicity, PiecewiseLinear};
use crate::envs::{
    make_homogeneous_market, make_inventory_env, make_piecewise_uniform_taskpricing, make_staircase_instance,
    make_taskpricing, make_two_type_market, make_uniform_market, Market, SupplyModel,
};
use crate::error::{Error, Result};
use crate::model::{OutcomeSpace, WorkerType};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeSpec {
    pub weight: f64,
    pub costs: Vec<f64>,
    pub production: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tiebreak: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypesSpec {
    pub values: Vec<f64>,
    pub types: Vec<TypeSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSpec {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl CurveSpec {
    fn build<S: Scalar>(&self, dir: Monotonicity) -> Result<PiecewiseLinear<S>> {
        PiecewiseLinear::monotone(
            self.xs.iter().map(|&x| S::lit(x)).collect(),
            self.ys.iter().map(|&y| S::lit(y)).collect(),
            dir,
        )
    }
}

/// Acceptance law of a task-pricing market.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AcceptSpec {
    Curve { accept: CurveSpec },
    PiecewiseUniform { breakpoints: Vec<f64>, densities: Vec<f64>, lambda: f64 },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "market", rename_all = "snake_case")]
pub enum MarketSpec {
    Uniform,
    /// Common cost `c_h`; drawn from `U[0,1]` per run when absent.
    Homogeneous {
        #[serde(default)]
        cost: Option<f64>,
    },
    /// Two equally likely costs; each drawn from `U[0,1]` per run when absent.
    TwoType {
        #[serde(default)]
        costs: Option<[f64; 2]>,
    },
    Taskpricing {
        #[serde(default = "one")]
        value: f64,
        #[serde(flatten)]
        law: AcceptSpec,
    },
    Staircase {
        delta: f64,
    },
    Inventory {
        demand: CurveSpec,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EnvSpec {
    Named(MarketSpec),
    Types(TypesSpec),
}

impl EnvSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Whether `build` draws parameters from the rng.
    pub fn is_random(&self) -> bool {
        matches!(
            self,
            EnvSpec::Named(MarketSpec::Homogeneous { cost: None } | MarketSpec::TwoType { costs: None })
        )
    }

    /// Number of non-null outcomes.
    pub fn dim(&self) -> usize {
        match self {
            EnvSpec::Types(t) => t.values.len().saturating_sub(1),
            EnvSpec::Named(MarketSpec::Uniform | MarketSpec::Homogeneous { .. } | MarketSpec::TwoType { .. }) => 2,
            EnvSpec::Named(_) => 1,
        }
    }

    /// Builds the market, drawing any unspecified costs from `rng`.
    pub fn build<S: Scalar, R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Market<S>> {
        match self {
            EnvSpec::Types(t) => build_types(t),
            EnvSpec::Named(spec) => match spec {
                MarketSpec::Uniform => Ok(make_uniform_market()),
                MarketSpec::Homogeneous { cost } => {
                    let c = cost.unwrap_or_else(|| rng.random());
                    make_homogeneous_market(S::lit(c))
                }
                MarketSpec::TwoType { costs } => {
                    let [a, b] = costs.unwrap_or_else(|| [rng.random(), rng.random()]);
                    make_two_type_market(S::lit(a), S::lit(b))
                }
                MarketSpec::Taskpricing { value, law } => match law {
                    AcceptSpec::Curve { accept } => make_taskpricing(accept.build(Monotonicity::NonDecreasing)?, S::lit(*value)),
                    AcceptSpec::PiecewiseUniform { breakpoints, densities, lambda } => {
                        let lit = |v: &[f64]| v.iter().map(|&x| S::lit(x)).collect::<Vec<S>>();
                        make_piecewise_uniform_taskpricing(&lit(breakpoints), &lit(densities), S::lit(*lambda), S::lit(*value))
                    }
                },
                MarketSpec::Staircase { delta } => Ok(make_staircase_instance(*delta)?.0),
                MarketSpec::Inventory { demand } => make_inventory_env(demand.build(Monotonicity::NonIncreasing)?),
            },
        }
    }
}

fn build_types<S: Scalar>(spec: &TypesSpec) -> Result<Market<S>> {
    if spec.types.is_empty() {
        return Err(Error::Supply("no worker types".into()));
    }
    let total: f64 = spec.types.iter().map(|t| t.weight).sum();
    if spec.types.iter().any(|t| !(t.weight >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::Supply(format!("type weights must be non-negative and sum to 1, got {total}")));
    }
    let outcomes = OutcomeSpace::new(spec.values.iter().map(|&v| S::lit(v)).collect())?;
    let types = spec
        .types
        .iter()
        .map(|t| {
            WorkerType::new(
                t.costs.iter().map(|&c| S::lit(c)).collect(),
                t.production.iter().map(|r| r.iter().map(|&p| S::lit(p)).collect()).collect(),
                t.tiebreak.clone(),
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let weights = spec.types.iter().map(|t| S::lit(t.weight)).collect();
    Market::new(outcomes, SupplyModel::FiniteMixture { types, weights })
}
