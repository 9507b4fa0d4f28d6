//! Per-round telemetry shared by the zooming algorithm and the baselines.

use std::collections::HashMap;
use std::io::Write;

use serde::Serialize;

use crate::envs::Observation;
use crate::model::Contract;
use crate::scalar::Scalar;

/// Which anchor of the chosen cell (or which arm) was posted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AnchorKind {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
    #[serde(rename = "atomic")]
    Atomic,
}

impl AnchorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AnchorKind::Plus => "+",
            AnchorKind::Minus => "-",
            AnchorKind::Atomic => "atomic",
        }
    }
}

/// One row of a run log.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundLog<S> {
    pub t: u64,
    /// Cell notation `j:(k…)` for zooming; the arm's increments for baselines.
    pub cell: String,
    pub anchor: AnchorKind,
    pub observation: Observation<S>,
    pub zoomed: bool,
    pub active_cells: usize,
}

/// Everything a run leaves behind for analysis.
#[derive(Debug, Clone)]
pub struct RunRecord<S: Scalar> {
    pub algorithm: String,
    pub run_id: u64,
    pub seed: u64,
    /// Distinct posted contracts, in order of first use.
    pub contracts: Vec<Contract<S>>,
    /// Per round: index into `contracts`.
    pub posted: Vec<u32>,
    /// Per round realised requester utility.
    pub utilities: Vec<S>,
    /// Detailed rows, when logging was requested.
    pub rounds: Option<Vec<RoundLog<S>>>,
    /// Rounds at which a zoom-in happened (zooming only).
    pub zoom_rounds: Vec<u64>,
}

impl<S: Scalar> RunRecord<S> {
    pub fn horizon(&self) -> u64 {
        self.posted.len() as u64
    }

    pub fn cumulative_utility(&self) -> S {
        self.utilities.iter().copied().sum()
    }

    /// Time-averaged realised utility after `t` rounds.
    pub fn average_utility(&self, t: usize) -> S {
        let t = t.min(self.utilities.len());
        if t == 0 {
            return S::zero();
        }
        self.utilities[..t].iter().copied().sum::<S>() / S::from_usize_lossy(t)
    }

    /// How often each distinct contract was posted.
    pub fn posting_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.contracts.len()];
        for &i in &self.posted {
            counts[i as usize] += 1;
        }
        counts
    }

    /// Writes the per-round rows as CSV (header included).
    pub fn write_csv<W: Write>(&self, out: W, with_header: bool) -> std::io::Result<()> {
        write_rounds_csv(std::slice::from_ref(self), out, with_header, None)
    }
}

/// CSV header for per-round logs.
pub const ROUND_COLUMNS: [&str; 10] = [
    "run_id",
    "t",
    "cell",
    "anchor",
    "outcome",
    "value",
    "payment",
    "utility",
    "zoomed",
    "active_cell_count",
];

/// Writes per-round rows of several runs. With `policy` set, a trailing
/// `policy` column is added.
pub fn write_rounds_csv<S: Scalar, W: Write>(
    runs: &[RunRecord<S>],
    out: W,
    with_header: bool,
    policy: Option<&str>,
) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(out);
    if with_header {
        write!(w, "{}", ROUND_COLUMNS.join(","))?;
        if policy.is_some() {
            write!(w, ",policy")?;
        }
        writeln!(w)?;
    }
    for run in runs {
        let Some(rows) = &run.rounds else { continue };
        for r in rows {
            let o = &r.observation;
            write!(
                w,
                "{},{},\"{}\",{},{},{},{},{},{},{}",
                run.run_id,
                r.t,
                r.cell,
                r.anchor.as_str(),
                o.outcome,
                o.value,
                o.payment,
                o.utility,
                u8::from(r.zoomed),
                r.active_cells
            )?;
            if let Some(p) = policy {
                write!(w, ",{p}")?;
            }
            writeln!(w)?;
        }
    }
    w.flush()
}

/// Accumulates a [`RunRecord`] round by round, deduplicating contracts.
#[derive(Debug)]
pub(crate) struct Recorder<S: Scalar> {
    record: RunRecord<S>,
    index: HashMap<Vec<u64>, u32>,
}

impl<S: Scalar> Recorder<S> {
    pub fn new(algorithm: impl Into<String>, run_id: u64, seed: u64, log_rounds: bool, horizon: u64) -> Self {
        let cap = horizon.min(1 << 24) as usize;
        Self {
            record: RunRecord {
                algorithm: algorithm.into(),
                run_id,
                seed,
                contracts: Vec::new(),
                posted: Vec::with_capacity(cap),
                utilities: Vec::with_capacity(cap),
                rounds: log_rounds.then(|| Vec::with_capacity(cap)),
                zoom_rounds: Vec::new(),
            },
            index: HashMap::new(),
        }
    }

    pub fn push(&mut self, contract: &Contract<S>, obs: &Observation<S>, row: impl FnOnce() -> RoundLog<S>) {
        let key: Vec<u64> = contract.increments().iter().map(|x| x.as_f64().to_bits()).collect();
        let next = self.record.contracts.len() as u32;
        let id = *self.index.entry(key).or_insert_with(|| next);
        if id == next {
            self.record.contracts.push(contract.clone());
        }
        self.record.posted.push(id);
        self.record.utilities.push(obs.utility);
        if let Some(rows) = self.record.rounds.as_mut() {
            rows.push(row());
        }
    }

    pub fn zoomed(&mut self, t: u64) {
        self.record.zoom_rounds.push(t);
    }

    pub fn finish(self) -> RunRecord<S> {
        self.record
    }
}
