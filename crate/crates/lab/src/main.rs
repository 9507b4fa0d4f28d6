use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use contract_lab::commands;
use contract_lab::suites::{self, VerifyOptions, SUITES};
use contract_lab::ExperimentConfig;

#[derive(Parser)]
#[command(name = "contract-lab", about = "Seeded simulations of adaptive contract design")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the run count.
    #[arg(long)]
    runs: Option<usize>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the base seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(&self.config).with_context(|| format!("reading {}", self.config.display()))?;
        let mut cfg = ExperimentConfig::from_json(&text)?;
        if let Some(r) = self.runs {
            cfg.runs = r;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        if let Some(s) = self.seed {
            cfg.base_seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Time-averaged utility after T rounds per algorithm and δ.
    SweepDelta(Common),
    /// Running average utility at checkpoints.
    OverTime(Common),
    /// Trailing-window utility of long runs.
    LimitOpt(Common),
    /// Census of wide near-optimal cells and the width-dimension fit.
    Census(Common),
    /// Per-round logs of every configured run.
    Run(Common),
    /// Property suites; exits non-zero on any failure.
    Verify {
        /// Comma-separated suite names; all suites when absent.
        #[arg(long, value_delimiter = ',')]
        suites: Option<Vec<String>>,
        /// Clamp the zooming width estimate at zero.
        #[arg(long)]
        clamp_width: bool,
        /// Also write the verdicts to this JSON file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Cmd::SweepDelta(c) => {
            commands::sweep_delta(&c.load()?)?;
        }
        Cmd::OverTime(c) => {
            commands::over_time(&c.load()?)?;
        }
        Cmd::LimitOpt(c) => {
            commands::limit_opt(&c.load()?)?;
        }
        Cmd::Census(c) => {
            commands::census(&c.load()?)?;
        }
        Cmd::Run(c) => {
            for f in commands::run(&c.load()?)? {
                eprintln!("wrote {}", f.display());
            }
        }
        Cmd::Verify { suites: names, clamp_width, out } => {
            let names: Vec<String> = match names {
                Some(n) => n.into_iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
                None => SUITES.iter().map(|s| s.to_string()).collect(),
            };
            let verdicts = suites::verify(&names, VerifyOptions { clamp_width })?;
            for v in &verdicts {
                eprintln!("{}", v.line());
            }
            let json = serde_json::to_string_pretty(&verdicts)?;
            println!("{json}");
            if let Some(path) = out {
                std::fs::write(&path, json + "\n").with_context(|| format!("writing {}", path.display()))?;
            }
            return Ok(verdicts.iter().all(|v| v.passed));
        }
    }
    Ok(true)
}
