use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_puppetai"))
}

fn repo(path: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(path)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn puppetai")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn validate_sequence_ok_and_errors() {
    let o = run(&["validate", "--seq", "[Waving][1][Joy][1]"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let o = run(&["validate", "--seq", "[Joy][]"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("error[MissingNumber]"), "{err}");
    assert!(err.contains("offset 6"), "{err}");

    let o = run(&["validate", "--seq", "[Backflip][1]"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("error[UnknownGesture]"));
}

#[test]
fn validate_documents() {
    let cfg = repo("configs/demo.json");
    let o = run(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let model = repo("crates/core/assets/demo_model.json");
    assert_eq!(
        run(&["validate", "--model", model.to_str().unwrap()]).status.code(),
        Some(0)
    );
    let gestures = repo("crates/core/assets/gestures.json");
    assert_eq!(
        run(&["validate", "--gestures", gestures.to_str().unwrap()])
            .status
            .code(),
        Some(0)
    );

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"tick_hz": 0}"#).unwrap();
    let o = run(&["validate", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("error[SchemaError]"));

    let missing = dir.path().join("nope.json");
    let o = run(&["validate", "--config", missing.to_str().unwrap()]);
    assert!(stderr(&o).contains("error[FileNotFound]"));
}

#[test]
fn play_writes_one_log_line_per_tick() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("t.jsonl");
    let o = run(&["play", "[Confusion][1]", "--log", log.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&log).unwrap();
    // (2.0 s nominal + 1 s pause) / 0.02 s
    assert_eq!(text.lines().count(), 150);
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(first["tick"], 0);
}

#[test]
fn play_rejects_bad_sequence() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("t.jsonl");
    let o = run(&["play", "[Joy][1", "--log", log.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("error[UnbalancedBracket]"));
}

#[test]
fn sim_runs_scenarios_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let script = repo("configs/scripts/scenarios.json");
    let cfg = repo("configs/demo.json");
    let mut logs = Vec::new();
    for i in 0..2 {
        let log = dir.path().join(format!("log{i}.jsonl"));
        let report = dir.path().join(format!("report{i}.json"));
        let o = run(&[
            "sim",
            "--config",
            cfg.to_str().unwrap(),
            "--script",
            script.to_str().unwrap(),
            "--log",
            log.to_str().unwrap(),
            "--report",
            report.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
        let seqs: Vec<&str> = r["sequences"]
            .as_array()
            .unwrap()
            .iter()
            .map(|s| s["sequence"].as_str().unwrap())
            .collect();
        assert_eq!(
            seqs,
            [
                "[Waving][1][Joy][1]",
                "[Joy][1][Dancing][3]",
                "[Sadness][1][Hug][3]",
                "[Confusion][1]"
            ]
        );
        logs.push(std::fs::read(&log).unwrap());
    }
    assert_eq!(logs[0], logs[1]);
}

#[test]
fn kinematics_table() {
    let o = run(&["kinematics", "--bend", "right_arm:vertical:150"]);
    assert_eq!(o.status.code(), Some(0));
    let out = String::from_utf8(o.stdout).unwrap();
    let line = out.lines().find(|l| l.starts_with("right_arm:vertical")).unwrap();
    assert!(line.ends_with("20.943951024"), "{line}");

    let o = run(&["kinematics", "--bend", "body:lateral:90"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("error[KinematicsError]"));

    let o = run(&["kinematics", "--bend", "nonsense"]);
    assert!(stderr(&o).contains("error[BadBend]"));
}

#[test]
fn serve_stops_after_tick_budget() {
    let o = run(&["serve", "--bind", "127.0.0.1:0", "--max-ticks", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("stopped after 5 ticks"));
}
