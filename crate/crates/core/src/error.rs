use thiserror::Error;

/// Reasons a worker type fails the model's behavioural assumptions.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum TypeViolation {
    #[error("type has no effort levels")]
    NoEfforts,
    #[error("production row {effort} has {got} entries, expected {expected}")]
    RowLength { effort: usize, got: usize, expected: usize },
    #[error("{costs} costs for {efforts} effort levels")]
    CostCount { costs: usize, efforts: usize },
    #[error("cost of effort {effort} is negative or not finite")]
    BadCost { effort: usize },
    #[error("null effort must have zero cost")]
    NullEffortCost,
    #[error("production row {effort} is not a probability vector")]
    RowNotProbability { effort: usize },
    #[error("null effort must deterministically yield the null outcome")]
    NullEffortNotNull,
    #[error("null outcome reachable from non-null effort {effort}")]
    NullOutcomeReachable { effort: usize },
    #[error("FOSD fails for pair ({0},{1})")]
    FosdFails(usize, usize),
    #[error("tie-break order is not a permutation of the effort levels")]
    BadTiebreak,
}

/// Errors raised while building or evaluating models, cells and runs.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid outcome space: {0}")]
    OutcomeSpace(String),
    #[error("invalid contract: {0}")]
    Contract(String),
    #[error("invalid worker type: {0}")]
    WorkerType(#[from] TypeViolation),
    #[error("invalid supply model: {0}")]
    Supply(String),
    #[error("contract has {got} increments, environment expects {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("invalid candidate set: {0}")]
    CandidateSet(String),
    #[error("depth cap {0} exceeded")]
    DepthCap(u32),
    #[error("cell {0} contains no candidate contract")]
    IrrelevantCell(String),
    #[error("cell {0} is atomic")]
    AtomicCell(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invariant violated at round {round}: {detail}")]
    Invariant { round: u64, detail: String },
    #[error("census guard exceeded: more than {0} feasible cells")]
    CensusGuard(usize),
    #[error("mismatched run metadata: {0}")]
    RunMismatch(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
