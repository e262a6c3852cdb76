//! The `rangewalk` binary: reports, exit codes and determinism.

use std::path::{Path, PathBuf};
use std::process::Command;

use rangewalk_harness::report::{parse_csv, parse_jsonl};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rangewalk"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("rangewalk-cli-test-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str], out: &Path) -> i32 {
    let status = bin().args(args).arg("--output").arg(out).status().unwrap();
    status.code().unwrap()
}

const SMALL: &[&str] = &["--n", "300", "--n", "3000", "--trials", "3", "--window", "512", "--seed", "11"];

#[test]
fn localize_writes_summary_and_trials() {
    let dir = scratch("localize");
    let out = dir.join("loc.csv");
    assert_eq!(run(&[&["localize"], SMALL].concat(), &out), 0);
    let summary = parse_csv(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(summary.columns[..4], ["beta", "n", "epsilon", "trials"]);
    // Two horizons times the default epsilon grid.
    assert_eq!(summary.rows.len(), 6);
    let trials = parse_csv(&std::fs::read(dir.join("loc.trials.csv")).unwrap()).unwrap();
    assert_eq!(trials.config_hash, summary.config_hash);
    assert_eq!(trials.rows.len(), 6);
    let dev = trials.columns.iter().position(|c| c == "deviation").unwrap();
    for row in trials.rows.iter().filter(|r| r[5] == "ok") {
        assert!(row[dev].parse::<f64>().unwrap() >= 0.0);
    }
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn jsonl_output_parses() {
    let dir = scratch("jsonl");
    let out = dir.join("v.jsonl");
    assert_eq!(run(&["valleys", "--n", "1000", "--trials", "2", "--window", "512", "--format", "jsonl"], &out), 0);
    let p = parse_jsonl(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(p.rows.len(), 2);
    assert_eq!(p.columns[0], "trial");
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn invalid_configuration_exits_with_2() {
    let dir = scratch("invalid");
    let out = dir.join("x.csv");
    assert_eq!(run(&["localize", "--dimension", "3"], &out), 2);
    assert_eq!(run(&["localize", "--beta", "0.5"], &out), 2);
    assert_eq!(run(&["localize", "--format", "xml"], &out), 2);
    assert!(!out.exists());
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn exhausted_budget_exits_with_3() {
    let dir = scratch("budget");
    let out = dir.join("x.csv");
    let code = run(&["simulate", "--beta", "1", "--n", "100000", "--window", "64", "--max-window", "64"], &out);
    assert_eq!(code, 3);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn config_file_and_flags() {
    let dir = scratch("config");
    let cfg = dir.join("run.txt");
    std::fs::write(&cfg, "# small run\nn = 500\ntrials = 2\nwindow = 256\nseed = 5\n").unwrap();
    let a = dir.join("a.csv");
    let b = dir.join("b.csv");
    assert_eq!(run(&["localize", "--config", cfg.to_str().unwrap()], &a), 0);
    assert_eq!(run(&["localize", "--config", cfg.to_str().unwrap(), "--seed", "6"], &b), 0);
    let (pa, pb) = (parse_csv(&std::fs::read(&a).unwrap()).unwrap(), parse_csv(&std::fs::read(&b).unwrap()).unwrap());
    assert_ne!(pa.config_hash, pb.config_hash);
    assert_eq!(pa.rows.len(), 3);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn small_verbs_are_deterministic() {
    let dir = scratch("determinism");
    let cases: &[&[&str]] = &[
        &["cut-times", "--cut-steps", "50", "--seed", "2"],
        &["dump-path", "--window", "300"],
        &["lerw-sample", "--window", "300"],
        &["potential", "--window", "300", "--model", "lerw"],
        &["simulate", "--n", "2000", "--window", "256"],
    ];
    for (i, args) in cases.iter().enumerate() {
        let a = dir.join(format!("{i}a.csv"));
        let b = dir.join(format!("{i}b.csv"));
        assert_eq!(run(args, &a), 0, "{args:?}");
        assert_eq!(run(&[*args, &["--threads", "3"]].concat(), &b), 0);
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap(), "{args:?}");
    }
    std::fs::remove_dir_all(dir).unwrap();
}
