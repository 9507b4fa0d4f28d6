use std::fs;
use std::path::Path;
use std::process::Command;

use contract_lab::commands;
use contract_lab::experiment::{execute_runs, AlgorithmSpec};
use contract_lab::ExperimentConfig;
use contract_zoom::Environment;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_contract-lab"))
}

fn write_config(dir: &Path, json: &str) -> std::path::PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, json).unwrap();
    path
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

const SMALL: &str = r#"{"env":{"market":"uniform"},"horizons":[400],"runs":4,"base_seed":3}"#;

#[test]
fn sweep_delta_rows_and_schema() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let st = bin().args(["sweep-delta", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert!(st.success());
    let (header, rows) = csv_rows(&out.join("sweep_delta.csv"));
    assert_eq!(
        header,
        ["algorithm", "delta", "horizon", "runs", "mean_utility", "se_utility", "mean_regret", "se_regret"]
    );
    assert_eq!(rows.len(), 9);
    assert!(rows.iter().all(|r| r[3] == "4" && r[2] == "400"));
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("metadata.json")).unwrap()).unwrap();
    for key in ["git_hash", "config_hash", "seeds", "constants"] {
        assert!(meta.get(key).is_some(), "metadata lacks {key}");
    }
    assert_eq!(meta["seeds"]["base_seed"], 3);
    assert_eq!(meta["constants"]["c_zoom"], 0.6);
}

#[test]
fn overrides_apply() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("o");
    let st = bin()
        .args(["sweep-delta", "--runs", "2", "--seed", "9", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(st.success());
    let (_, rows) = csv_rows(&out.join("sweep_delta.csv"));
    assert!(rows.iter().all(|r| r[3] == "2"));
}

#[test]
fn over_time_checkpoints() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"env":{"market":"uniform"},"horizons":[1000],"runs":3,"deltas":[0.08],"checkpoints":[10,100,1000]}"#,
    );
    let out = dir.path().join("out");
    assert!(bin().args(["over-time", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap().success());
    let (header, rows) = csv_rows(&out.join("over_time.csv"));
    assert_eq!(header, ["algorithm", "delta", "t", "runs", "mean_utility", "se_utility"]);
    assert_eq!(rows.len(), 3 * 3);
    let ts: Vec<&str> = rows.iter().take(3).map(|r| r[2].as_str()).collect();
    assert_eq!(ts, ["10", "100", "1000"]);
}

#[test]
fn running_average_matches_definition() {
    let mut cfg = ExperimentConfig::from_json(r#"{"env":{"market":"uniform"},"runs":2}"#).unwrap();
    cfg.checkpoints = Some(vec![7, 50]);
    let outs = execute_runs(&cfg, &AlgorithmSpec::zooming(), 0.08, 50, false).unwrap();
    for o in &outs {
        let u = &o.record.utilities;
        assert!((o.record.average_utility(7) - u[..7].iter().sum::<f64>() / 7.0).abs() < 1e-12);
    }
}

#[test]
fn limit_window_lies_within_round_utilities() {
    let dir = TempDir::new().unwrap();
    let mut cfg = ExperimentConfig::from_json(
        r#"{"env":{"market":"uniform"},"runs":3,"deltas":[0.08,0.2],"limit_horizon":2000,"limit_window":0.1,"algorithms":[{"algorithm":"zooming"}]}"#,
    )
    .unwrap();
    cfg.output_dir = dir.path().to_path_buf();
    let rows = commands::limit_opt(&cfg).unwrap();
    assert_eq!(rows.len(), 2);
    for row in &rows {
        assert_eq!(row.window, 200);
        let outs = execute_runs(&cfg, &cfg.algorithms[0], row.delta, 2000, false).unwrap();
        let tail: Vec<f64> = outs.iter().flat_map(|o| o.record.utilities[1800..].to_vec()).collect();
        let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(row.mean_window_utility >= lo && row.mean_window_utility <= hi);
    }
    let again = commands::limit_opt(&cfg).unwrap();
    assert_eq!(rows, again);
}

#[test]
fn run_logs_are_byte_identical_under_a_fixed_seed() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"env":{"market":"two_type"},"horizons":[300],"runs":3,"deltas":[0.1],"base_seed":11}"#,
    );
    let read_all = |out: &Path| -> Vec<(String, Vec<u8>)> {
        let mut files: Vec<_> = fs::read_dir(out)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.extension().is_some_and(|e| e == "csv"))
            .collect();
        files.sort();
        files.iter().map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(p).unwrap())).collect()
    };
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    for out in [&a, &b] {
        assert!(bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(out).status().unwrap().success());
    }
    assert!(bin().args(["run", "--seed", "12", "--config"]).arg(&cfg).arg("--out").arg(&c).status().unwrap().success());
    let (fa, fb, fc) = (read_all(&a), read_all(&b), read_all(&c));
    assert_eq!(fa.len(), 3);
    assert_eq!(fa, fb);
    assert_ne!(fa, fc);
    let (header, rows) = csv_rows(&a.join("rounds_zooming_d0.1_T300.csv"));
    assert_eq!(header.last().unwrap(), "policy");
    assert_eq!(rows.len(), 3 * 300);
}

#[test]
fn census_outputs() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), r#"{"env":{"market":"uniform"},"census":{"max_depth":6}}"#);
    let out = dir.path().join("out");
    assert!(bin().args(["census", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap().success());
    let fit: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("width_dimension.json")).unwrap()).unwrap();
    for key in ["slope", "intercept", "r2", "eps_list"] {
        assert!(fit.get(key).is_some(), "fit lacks {key}");
    }
    let (_, counts) = csv_rows(&out.join("census_counts.csv"));
    assert_eq!(counts.len(), 6);
    let (header, _) = csv_rows(&out.join("census_rows.csv"));
    assert_eq!(header, ["cell", "depth", "virtual_width", "width", "badness", "upper_bounded"]);
}

#[test]
fn verify_exit_codes() {
    let empty = bin().args(["verify", "--suites", ""]).output().unwrap();
    assert!(!empty.status.success());
    assert!(String::from_utf8_lossy(&empty.stderr).contains("no suites selected"));
    let unknown = bin().args(["verify", "--suites", "nope"]).output().unwrap();
    assert!(!unknown.status.success());
    let ok = bin().args(["verify", "--suites", "nonmonotone_optimum,golden"]).output().unwrap();
    assert!(ok.status.success());
    let verdicts: serde_json::Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert_eq!(verdicts.as_array().unwrap().len(), 2);
    assert_eq!(verdicts[1]["name"], "golden");
    assert_eq!(verdicts[1]["passed"], true);
    let fault = bin().args(["verify", "--suites", "golden", "--clamp-width"]).output().unwrap();
    assert!(!fault.status.success());
}

#[test]
fn bad_config_is_reported_with_its_path() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("absent.json");
    let out = bin().args(["sweep-delta", "--config"]).arg(&missing).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.json"));
    let cfg = write_config(dir.path(), r#"{"env":{"market":"uniform"},"runs":0}"#);
    assert!(!bin().args(["sweep-delta", "--config"]).arg(&cfg).status().unwrap().success());
}

/// Residual noise of consecutive runs is uncorrelated.
#[test]
fn run_streams_are_uncorrelated() {
    let cfg = ExperimentConfig::from_json(r#"{"env":{"market":"uniform"},"runs":21}"#).unwrap();
    let outs = execute_runs(&cfg, &AlgorithmSpec::Ucb1Constant { c: 1.0 }, 0.1, 2000, false).unwrap();
    let residuals: Vec<Vec<f64>> = outs
        .iter()
        .map(|o| {
            let exact: Vec<f64> = o.record.contracts.iter().map(|c| o.market.exact_utility(c).unwrap()).collect();
            o.record.posted.iter().zip(&o.record.utilities).map(|(&i, u)| u - exact[i as usize]).collect()
        })
        .collect();
    let corr = |a: &[f64], b: &[f64]| {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    };
    let cs: Vec<f64> = residuals.windows(2).map(|w| corr(&w[0], &w[1])).collect();
    let mean = cs.iter().sum::<f64>() / cs.len() as f64;
    let se = 1.0 / (2000.0 * cs.len() as f64).sqrt();
    assert!(mean.abs() < 4.0 * se, "mean inter-run correlation {mean}");
}
