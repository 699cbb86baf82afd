use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;
use unirep_cli::{run, verify_report, EXIT_INTERNAL, EXIT_OK, EXIT_PRECONDITION, EXIT_RESOURCE};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn config(name: &str) -> String {
    configs().join(name).display().to_string()
}

fn run_to(dir: &Path, name: &str, args: &[&str]) -> (i32, Option<Value>) {
    let out = dir.join(name);
    let mut argv = vec!["unirep".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    argv.extend(["--out".to_string(), out.display().to_string()]);
    let code = run(&argv);
    let report = fs::read_to_string(&out).ok().map(|t| serde_json::from_str(&t).unwrap());
    (code, report)
}

fn headline(report: &Value) -> f64 {
    report["headline"]["value"].as_f64().unwrap()
}

#[test]
fn unknown_subcommand_is_usage_error() {
    assert_eq!(run(["unirep", "frobnicate"]), EXIT_PRECONDITION);
}

#[test]
fn malformed_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, r#"{"group": {"kind": "free", "rank": "two"}}"#).unwrap();
    let cfg = load(&path);
    let err = unirep_cli::load_config(&cfg).unwrap_err().to_string();
    assert!(err.contains("$.group.rank"), "{err}");
    let code = run(["unirep", "probe-amenability", "--config", path.to_str().unwrap()]);
    assert_eq!(code, EXIT_PRECONDITION);
}

fn load(p: &Path) -> String {
    fs::read_to_string(p).unwrap()
}

#[test]
fn unknown_config_key_is_rejected() {
    let err = unirep_cli::load_config(r#"{"group": {"kind": "free", "rank": 2}, "tsk": {}}"#)
        .unwrap_err()
        .to_string();
    assert!(err.contains("tsk"), "{err}");
}

#[test]
fn missing_config_file_is_precondition() {
    assert_eq!(
        run(["unirep", "contain", "--config", "/nonexistent/config.json"]),
        EXIT_PRECONDITION
    );
}

#[test]
fn exhausted_cap_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let (code, report) = run_to(
        dir.path(),
        "r.json",
        &["probe-amenability", "--config", &config("f2.json"), "--cap-ball", "10"],
    );
    assert_eq!(code, EXIT_RESOURCE);
    assert!(report.is_none());
}

#[test]
fn self_target_is_matched_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let (code, report) = run_to(dir.path(), "r.json", &["contain", "--config", &config("f2-self-target.json")]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(headline(&report.unwrap()), 0.0);
}

#[test]
fn integers_probe_clears_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let (code, report) = run_to(dir.path(), "r.json", &["probe-amenability", "--config", &config("z.json")]);
    assert_eq!(code, EXIT_OK);
    let report = report.unwrap();
    assert_eq!(report["command"], "probe-amenability");
    assert_eq!(report["format"], 1);
    assert!(headline(&report) >= 0.97);
}

#[test]
fn report_echoes_effective_config() {
    let dir = tempfile::tempdir().unwrap();
    let (_, report) = run_to(
        dir.path(),
        "r.json",
        &["probe-amenability", "--config", &config("z.json"), "--nmax", "30"],
    );
    let task = &report.unwrap()["inputs"]["config"]["task"];
    assert_eq!(task["nmax"], 30);
    assert_eq!(task["exact-steps"], 40);
}

#[test]
fn csv_trace_has_one_row_per_step() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("trace.csv");
    let (code, _) = run_to(
        dir.path(),
        "r.json",
        &["probe-amenability", "--config", &config("z.json"), "--nmax", "10", "--csv", csv.to_str().unwrap()],
    );
    assert_eq!(code, EXIT_OK);
    let mut reader = csv::Reader::from_path(&csv).unwrap();
    assert_eq!(reader.headers().unwrap().iter().next(), Some("n"));
    assert_eq!(reader.records().count(), 11);
}

#[test]
fn csv_for_command_without_trace_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("trace.csv");
    let (code, _) = run_to(
        dir.path(),
        "r.json",
        &["folner-witness", "--config", &config("z.json"), "--csv", csv.to_str().unwrap()],
    );
    assert_eq!(code, EXIT_PRECONDITION);
}

#[test]
fn verify_accepts_fresh_and_rejects_tampered_reports() {
    let dir = tempfile::tempdir().unwrap();
    let (code, report) = run_to(dir.path(), "r.json", &["folner-witness", "--config", &config("z.json")]);
    assert_eq!(code, EXIT_OK);
    let path = dir.path().join("r.json");
    assert_eq!(run(["unirep", "verify", path.to_str().unwrap()]), EXIT_OK);
    assert!(verify_report(&load(&path)).unwrap() <= 1e-9);

    let mut report = report.unwrap();
    report["headline"]["value"] = Value::from(headline(&report) + 1e-3);
    let tampered = dir.path().join("t.json");
    fs::write(&tampered, serde_json::to_string(&report).unwrap()).unwrap();
    assert_eq!(run(["unirep", "verify", tampered.to_str().unwrap()]), EXIT_INTERNAL);
}

#[test]
fn seed_flag_changes_only_random_searches() {
    let dir = tempfile::tempdir().unwrap();
    let (_, a) = run_to(dir.path(), "a.json", &["probe-amenability", "--config", &config("z2.json"), "--seed", "1"]);
    let (_, b) = run_to(dir.path(), "b.json", &["probe-amenability", "--config", &config("z2.json"), "--seed", "2"]);
    assert_eq!(a.unwrap()["outputs"], b.unwrap()["outputs"]);
}
