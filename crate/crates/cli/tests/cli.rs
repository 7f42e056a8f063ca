use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.json"))
}

fn tsnsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tsnsim"))
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn run_writes_records_stats_and_histograms() {
    let dir = tempfile::tempdir().unwrap();
    let out = tsnsim(&["run", p(&scenario("direct_zero")), "--out", p(dir.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let names: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert!(names
        .iter()
        .any(|n| n.starts_with("records") && n.ends_with(".csv")));
    assert!(names.contains(&"stats.json".to_string()));
    assert!(names.iter().any(|n| n.ends_with(".tsv")), "{names:?}");
    let stats: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("stats.json")).unwrap()).unwrap();
    assert_eq!(stats["metadata"]["scenario"], "direct_zero");
}

#[test]
fn seed_flag_overrides_the_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let out = tsnsim(&[
        "run",
        p(&scenario("sleep_mode")),
        "--out",
        p(dir.path()),
        "--seed",
        "42",
    ]);
    assert_eq!(code(&out), 0);
    let stats: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("stats.json")).unwrap()).unwrap();
    assert_eq!(stats["metadata"]["seed"], 42);
}

#[test]
fn report_reproduces_the_run_statistics() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&tsnsim(&[
            "run",
            p(&scenario("sleep_mode")),
            "--out",
            p(dir.path())
        ])),
        0
    );
    let csv = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|x| x == "csv"))
        .unwrap();
    let out = tsnsim(&["report", p(&csv)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rep: Value = serde_json::from_slice(&out.stdout).unwrap();
    let stats: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("stats.json")).unwrap()).unwrap();
    assert_eq!(rep["stats"], stats["streams"][0]["stats"]);
}

#[test]
fn report_on_a_malformed_file_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("records.csv");
    fs::write(
        &csv,
        "seq,intended_tx_ns,sw_tx_ns,hw_tx_ns,hw_rx_ns,sw_rx_ns\n0,1,2\n",
    )
    .unwrap();
    let out = tsnsim(&["report", p(&csv)]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn sweep_runs_once_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let out = tsnsim(&[
        "sweep",
        p(&scenario("direct_zero")),
        "--param",
        "run.seed",
        "--values",
        "1,2,3",
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary: Vec<Value> = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary.len(), 3);
    for v in 1..=3 {
        assert!(dir.path().join(format!("run.seed={v}/stats.json")).exists());
    }
}

#[test]
fn sweep_over_a_missing_key_fails_as_config() {
    let out = tsnsim(&[
        "sweep",
        p(&scenario("direct_zero")),
        "--param",
        "nodes.nowhere.preset",
        "--values",
        "xdp",
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn validate_accepts_a_shipped_scenario() {
    let out = tsnsim(&["validate", p(&scenario("qbv"))]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("qbv: ok"));
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut doc: Value =
        serde_json::from_str(&fs::read_to_string(scenario("direct_zero")).unwrap()).unwrap();
    doc["links"][0]["speed"] = 1.into();
    let path = dir.path().join("bad.json");
    fs::write(&path, doc.to_string()).unwrap();
    for cmd in ["validate", "run"] {
        let mut args = vec![cmd, p(&path)];
        if cmd == "run" {
            args.extend(["--out", p(dir.path())]);
        }
        let out = tsnsim(&args);
        assert_eq!(code(&out), 2, "{cmd}");
        let text = String::from_utf8_lossy(&out.stdout) + String::from_utf8_lossy(&out.stderr);
        assert!(text.contains("links[0].speed"), "{text}");
    }
}

#[test]
fn missing_scenario_file_is_a_config_error() {
    let out = tsnsim(&["validate", "/nonexistent/scenario.json"]);
    assert_eq!(code(&out), 2);
}
