//! The CLI subcommands, as library functions that write into the output directory.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use contract_zoom::analysis::{self, MeanSe};
use contract_zoom::mesh::CandidateSet;
use contract_zoom::record::write_rounds_csv;
use serde::Serialize;

use crate::experiment::{
    build_market, AlgorithmSpec, CandidatesSpec, default_checkpoints, execute_runs, ExperimentConfig, RunOutput,
};
use crate::metadata::Metadata;

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for r in rows {
        w.serialize(r).with_context(|| format!("writing {}", path.display()))?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

/// Each `(algorithm, δ)` combination, with a single `δ` for full-space zooming.
fn grid(cfg: &ExperimentConfig) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    for (a, alg) in cfg.algorithms.iter().enumerate() {
        let full = matches!(
            alg,
            AlgorithmSpec::Zooming { candidates: CandidatesSpec::Full, .. }
        );
        if full {
            out.push((a, f64::NAN));
        } else {
            out.extend(cfg.deltas.iter().map(|&d| (a, d)));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub algorithm: String,
    pub delta: f64,
    pub horizon: u64,
    pub runs: usize,
    pub mean_utility: f64,
    pub se_utility: f64,
    pub mean_regret: f64,
    pub se_regret: f64,
}

/// Grid step used for `OPT` when the candidate set is the full space.
pub const FULL_SPACE_OPT_STEP: f64 = 0.005;

/// Regret of each run against `OPT` of its own candidate set and market.
pub fn run_regrets(outputs: &[RunOutput]) -> Result<Vec<analysis::RunRegret>> {
    outputs
        .iter()
        .map(|o| {
            let step = if o.set.is_finite() { None } else { Some(FULL_SPACE_OPT_STEP) };
            let rep = analysis::regret_report(std::slice::from_ref(&o.record), &o.market, &o.set, step)?;
            Ok(rep.runs[0])
        })
        .collect()
}

/// Mean time-averaged utility after `T` rounds per algorithm and `δ`.
pub fn sweep_delta(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    create_dir(&cfg.output_dir)?;
    let mut rows = Vec::new();
    for &horizon in &cfg.horizons {
        for (a, delta) in grid(cfg) {
            let alg = &cfg.algorithms[a];
            let outs = execute_runs(cfg, alg, delta, horizon, false)?;
            let avgs: Vec<f64> = outs.iter().map(|o| o.record.average_utility(horizon as usize)).collect();
            let regrets: Vec<f64> = run_regrets(&outs)?.iter().map(|r| r.oracle).collect();
            let (u, r) = (MeanSe::of(&avgs), MeanSe::of(&regrets));
            rows.push(SweepRow {
                algorithm: alg.label(),
                delta,
                horizon,
                runs: cfg.runs,
                mean_utility: u.mean,
                se_utility: u.se,
                mean_regret: r.mean,
                se_regret: r.se,
            });
        }
    }
    write_csv(&cfg.output_dir.join("sweep_delta.csv"), &rows)?;
    Metadata::collect(cfg, "sweep-delta").write(&cfg.output_dir)?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverTimeRow {
    pub algorithm: String,
    pub delta: f64,
    pub t: u64,
    pub runs: usize,
    pub mean_utility: f64,
    pub se_utility: f64,
}

/// Running average utility at each checkpoint, for the largest configured horizon.
pub fn over_time(cfg: &ExperimentConfig) -> Result<Vec<OverTimeRow>> {
    create_dir(&cfg.output_dir)?;
    let horizon = *cfg.horizons.iter().max().expect("validated");
    let checkpoints: Vec<u64> = match &cfg.checkpoints {
        Some(c) => c.iter().copied().filter(|&t| t >= 1 && t <= horizon).collect(),
        None => default_checkpoints(horizon),
    };
    let mut rows = Vec::new();
    for (a, delta) in grid(cfg) {
        let alg = &cfg.algorithms[a];
        let outs = execute_runs(cfg, alg, delta, horizon, false)?;
        for &t in &checkpoints {
            let avgs: Vec<f64> = outs.iter().map(|o| o.record.average_utility(t as usize)).collect();
            let s = MeanSe::of(&avgs);
            rows.push(OverTimeRow {
                algorithm: alg.label(),
                delta,
                t,
                runs: cfg.runs,
                mean_utility: s.mean,
                se_utility: s.se,
            });
        }
    }
    write_csv(&cfg.output_dir.join("over_time.csv"), &rows)?;
    Metadata::collect(cfg, "over-time").write(&cfg.output_dir)?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitRow {
    pub algorithm: String,
    pub delta: f64,
    pub horizon: u64,
    pub window: u64,
    pub runs: usize,
    pub mean_window_utility: f64,
    pub se_window_utility: f64,
}

/// Average utility over the trailing window of a long run, per `δ`.
pub fn limit_opt(cfg: &ExperimentConfig) -> Result<Vec<LimitRow>> {
    create_dir(&cfg.output_dir)?;
    let horizon = cfg.limit_horizon;
    let window = ((horizon as f64 * cfg.limit_window).round() as u64).clamp(1, horizon);
    let mut rows = Vec::new();
    for (a, delta) in grid(cfg) {
        let alg = &cfg.algorithms[a];
        let outs = execute_runs(cfg, alg, delta, horizon, false)?;
        let tail: Vec<f64> = outs
            .iter()
            .map(|o| {
                let u = &o.record.utilities;
                u[u.len() - window as usize..].iter().sum::<f64>() / window as f64
            })
            .collect();
        let s = MeanSe::of(&tail);
        rows.push(LimitRow {
            algorithm: alg.label(),
            delta,
            horizon,
            window,
            runs: cfg.runs,
            mean_window_utility: s.mean,
            se_window_utility: s.se,
        });
    }
    write_csv(&cfg.output_dir.join("limit_opt.csv"), &rows)?;
    Metadata::collect(cfg, "limit-opt").write(&cfg.output_dir)?;
    Ok(rows)
}

/// Census of wide near-optimal cells on the market of run 0.
pub fn census(cfg: &ExperimentConfig) -> Result<analysis::Census> {
    create_dir(&cfg.output_dir)?;
    let market = build_market(&cfg.env, cfg.base_seed, 0)?;
    let m = cfg.env.dim();
    let set = match cfg.census.delta {
        Some(d) => CandidateSet::uniform_mesh(m, d)?,
        None => CandidateSet::full_space(m),
    };
    let eps = cfg.census.eps_list.clone().unwrap_or_else(analysis::default_eps_list);
    let census = analysis::cell_census(&market, &set, cfg.census.max_depth, &eps, cfg.census.beta)?;
    write_csv(&cfg.output_dir.join("census_rows.csv"), &census.rows)?;
    #[derive(Serialize)]
    struct CountRow {
        eps: f64,
        count: usize,
    }
    let counts: Vec<CountRow> = census.counts.iter().map(|&(eps, count)| CountRow { eps, count }).collect();
    write_csv(&cfg.output_dir.join("census_counts.csv"), &counts)?;
    write_json(&cfg.output_dir.join("width_dimension.json"), &census.fit)?;
    Metadata::collect(cfg, "census").write(&cfg.output_dir)?;
    Ok(census)
}

/// Per-round logs of every configured run; returns the files written.
pub fn run(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    create_dir(&cfg.output_dir)?;
    let mut files = Vec::new();
    for &horizon in &cfg.horizons {
        for (a, delta) in grid(cfg) {
            let alg = &cfg.algorithms[a];
            let outs = execute_runs(cfg, alg, delta, horizon, true)?;
            let records: Vec<_> = outs.into_iter().map(|o| o.record).collect();
            let name = if delta.is_nan() {
                format!("rounds_{}_T{horizon}.csv", alg.label())
            } else {
                format!("rounds_{}_d{delta}_T{horizon}.csv", alg.label())
            };
            let path = cfg.output_dir.join(name);
            let file = fs::File::create(&path).with_context(|| format!("writing {}", path.display()))?;
            write_rounds_csv(&records, file, true, Some(&alg.label()))
                .with_context(|| format!("writing {}", path.display()))?;
            files.push(path);
        }
    }
    Metadata::collect(cfg, "run").write(&cfg.output_dir)?;
    Ok(files)
}
