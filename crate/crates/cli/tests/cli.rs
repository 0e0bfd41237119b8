use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ricci-lab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().expect("exit code")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("JSON report on stdout")
}

const FAST_FLOW: &[&str] = &["flow", "--N", "21", "--T", "0.001", "--deturck-T", "0.001", "--samples", "3"];

#[test]
fn verify_passes_for_catalog_solitons() {
    for name in ["berger", "warped-soliton", "obata-sphere", "euclidean"] {
        let out = run(&["verify", name, "--samples", "10"]);
        assert_eq!(out.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        let v = json(&out);
        assert_eq!(v["pass"], Value::Bool(true));
        assert!(!v["records"].as_array().unwrap().is_empty());
    }
}

#[test]
fn exit_codes() {
    assert_eq!(code(&["verify", "no-such-geometry"]), 2);
    assert_eq!(code(&["--bogus"]), 2);
    assert_eq!(code(&["verify", "berger", "--kappa", "-1"]), 3);
    assert_eq!(code(&["identities", "--m", "1"]), 3);
    assert_eq!(code(&["verify", "berger-soliton", "--samples", "5", "--tol-pointwise", "1e-300"]), 1);
    assert_eq!(code(&["verify", "berger", "--param", "tau=2", "--samples", "5"]), 0);
}

#[test]
fn failed_records_are_named_on_stderr() {
    let out = run(&["verify", "berger-soliton", "--samples", "5", "--tol-pointwise", "1e-300"]);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("FAIL") && err.contains("soliton-equation"), "{err}");
}

#[test]
fn reports_are_byte_identical_for_a_fixed_seed() {
    let args = ["verify", "obata-sphere", "--samples", "15", "--seed", "11"];
    let (a, b) = (run(&args), run(&args));
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);
    let c = run(&["verify", "obata-sphere", "--samples", "15", "--seed", "12"]);
    assert_ne!(a.stdout, c.stdout);
    let timed = json(&run(&["--timing", "verify", "euclidean", "--samples", "3"]));
    assert!(timed["wall_clock_seconds"].is_number());
    assert!(json(&run(&["verify", "euclidean", "--samples", "3"])).get("wall_clock_seconds").is_none());
}

#[test]
fn config_files_in_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let toml = dir.path().join("run.toml");
    std::fs::write(&toml, "command = \"verify\"\ngeometry = \"berger\"\nsamples = 7\n[params]\nkappa = 16\ntau = 3\n").unwrap();
    let out = run(&["--config", toml.to_str().unwrap(), "verify"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["config"]["samples"], 7);
    assert_eq!(v["config"]["params"]["kappa"], 16.0);
    // flags override the file
    let v = json(&run(&["--config", toml.to_str().unwrap(), "verify", "--samples", "4"]));
    assert_eq!(v["config"]["samples"], 4);

    let js = dir.path().join("run.json");
    std::fs::write(&js, r#"{"geometry": "obata-sphere", "samples": 5, "seed": 3}"#).unwrap();
    let out = run(&["--config", js.to_str().unwrap(), "verify"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["config"]["seed"], 3);

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "geometry = \"berger\"\nsampels = 3\n").unwrap();
    assert_eq!(code(&["--config", bad.to_str().unwrap(), "verify"]), 2);
    assert_eq!(code(&["--config", dir.path().join("missing.toml").to_str().unwrap(), "verify"]), 2);
}

#[test]
fn flow_writes_a_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("traj.csv");
    let report = dir.path().join("flow.json");
    let mut args = FAST_FLOW.to_vec();
    args.extend(["--traj", traj.to_str().unwrap(), "--out", report.to_str().unwrap()]);
    let out = run(&args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(&traj).unwrap();
    assert_eq!(csv.lines().next(), Some("t,node,A,B,phi_1"));
    assert_eq!(csv.lines().count(), 1 + 2 * 21);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let checks: Vec<&str> = v["records"].as_array().unwrap().iter().map(|r| r["check"].as_str().unwrap()).collect();
    for c in ["psi1-printed-vs-oracle", "flow-residual-printed", "integrator-vs-oracle", "deturck-correspondence"] {
        assert!(checks.contains(&c), "{c} missing");
    }
}

#[test]
fn flow_rejects_a_closed_window_and_bad_grids() {
    assert_eq!(code(&["flow", "--N", "3"]), 3);
    assert_eq!(code(&["flow", "--lambda", "0.5"]), 3);
    assert_eq!(code(&["flow", "--N", "21", "--T", "0.01", "--dt", "1"]), 3);
}

fn write_report(dir: &Path, name: &str, args: &[&str]) -> String {
    let path = dir.join(name);
    let mut full = args.to_vec();
    let p = path.to_str().unwrap().to_string();
    full.extend(["--out", &p]);
    let _ = run(&full);
    p
}

#[test]
fn report_merges_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_report(dir.path(), "a.json", &["verify", "euclidean", "--samples", "3"]);
    let b = write_report(dir.path(), "b.json", &["verify", "berger", "--samples", "3"]);
    let out = run(&["report", &a, &b]);
    assert_eq!(out.status.code(), Some(0));
    let merged = json(&out);
    let ea: Value = serde_json::from_str(&std::fs::read_to_string(&a).unwrap()).unwrap();
    let eb: Value = serde_json::from_str(&std::fs::read_to_string(&b).unwrap()).unwrap();
    let total = ea["records"].as_array().unwrap().len() + eb["records"].as_array().unwrap().len();
    assert_eq!(merged["records"].as_array().unwrap().len(), total);
    assert!(String::from_utf8_lossy(&out.stderr).contains("PASS"));

    let c = write_report(dir.path(), "c.json", &["verify", "berger-soliton", "--samples", "3", "--tol-pointwise", "1e-300"]);
    assert_eq!(code(&["report", &a, &c]), 1);
    assert_eq!(code(&["report", dir.path().join("nope.json").to_str().unwrap()]), 2);
}
