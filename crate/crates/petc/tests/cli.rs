use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};
use tempfile::TempDir;

const EXAMPLE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/four_agent_delay.json");

fn petc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_petc")).args(args).env_remove("PETC_OUT_DIR").output().expect("spawn petc")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn example_json() -> Value {
    serde_json::from_str(&fs::read_to_string(EXAMPLE).unwrap()).unwrap()
}

fn write_json(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(v).unwrap()).unwrap();
    path
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn synth_reports_example_design() {
    let out = petc(&["synth", EXAMPLE]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["design"]["p"], 7);
    assert_eq!(r["design"]["eta"], 10.85);
    assert!(r["design"]["feasibility_margin"].as_f64().unwrap() > 0.0);
    assert_eq!(r["analysis"]["kernel_dim"], 2);
    assert_eq!(r["witness"]["feasible"], true);
}

#[test]
fn synth_writes_report_file() {
    let dir = TempDir::new().unwrap();
    let target = dir.path().join("report.json");
    let out = petc(&["synth", EXAMPLE, "--out", p(&target)]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    let r: Value = serde_json::from_str(&fs::read_to_string(target).unwrap()).unwrap();
    assert_eq!(r["agents"], 4);
}

#[test]
fn disconnected_graph_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let mut v = example_json();
    v["edges"] = serde_json::json!([[0, 1], [2, 3]]);
    let f = write_json(dir.path(), "split.json", &v);
    let out = petc(&["synth", p(&f)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("graph not connected"), "{}", stderr(&out));
}

#[test]
fn off_grid_delay_bound_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let mut v = example_json();
    v["d"] = serde_json::json!(0.0141);
    let f = write_json(dir.path(), "grid.json", &v);
    assert_eq!(code(&petc(&["synth", p(&f)])), 2);
}

#[test]
fn unknown_field_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let mut v = example_json();
    v["gain"] = serde_json::json!(1.0);
    let f = write_json(dir.path(), "typo.json", &v);
    assert_eq!(code(&petc(&["run", p(&f), "--out-dir", p(dir.path())])), 2);
}

#[test]
fn oversized_delay_bound_is_infeasible() {
    let dir = TempDir::new().unwrap();
    let mut v = example_json();
    v["d"] = serde_json::json!(0.2);
    v["delays"] = serde_json::json!([0.2]);
    let f = write_json(dir.path(), "big.json", &v);
    let out = petc(&["synth", p(&f)]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("largest feasible d"), "{}", stderr(&out));
}

fn run_into(dir: &Path, args: &[&str]) -> Output {
    let mut all = vec!["run"];
    all.extend_from_slice(args);
    all.extend_from_slice(&["--out-dir", p(dir)]);
    petc(&all)
}

#[test]
fn zero_duration_gives_header_only_logs() {
    let dir = TempDir::new().unwrap();
    let out = run_into(dir.path(), &[EXAMPLE, "--duration", "0"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for (name, header) in [
        ("events.csv", "t,agent"),
        ("metrics.csv", "t,V,envelope,max_disagreement"),
        ("trajectory.csv", "t,agent,x1,x2,u1"),
    ] {
        let text = fs::read_to_string(dir.path().join(name)).unwrap();
        assert_eq!(text.trim_end(), header, "{name}");
    }
}

#[test]
fn example_run_passes_and_logs_are_consistent() {
    let dir = TempDir::new().unwrap();
    let out = run_into(dir.path(), &[EXAMPLE, "--duration", "4"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let mut events = csv::Reader::from_path(dir.path().join("events.csv")).unwrap();
    let rows: Vec<(f64, usize)> = events.deserialize().map(|r| r.unwrap()).collect();
    assert!(rows.len() >= 4);
    assert!(rows.iter().take(4).all(|(t, _)| *t == 0.0));
    let mut metrics = csv::Reader::from_path(dir.path().join("metrics.csv")).unwrap();
    let m: Vec<(f64, f64, f64, f64)> = metrics.deserialize().map(|r| r.unwrap()).collect();
    assert!(m.iter().all(|(_, v, env, _)| v <= &(env * (1.0 + 1e-6))));
    let mut traj = csv::Reader::from_path(dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(traj.records().count(), 4 * m.len());
}

#[test]
fn repeated_seed_gives_identical_logs() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    for d in [&a, &b] {
        assert_eq!(code(&run_into(d.path(), &[EXAMPLE, "--duration", "3", "--seed", "11"])), 0);
    }
    for name in ["trajectory.csv", "events.csv", "metrics.csv"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn floats_round_trip_exactly() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&run_into(dir.path(), &[EXAMPLE, "--duration", "1"])), 0);
    let text = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let mut checked = 0;
    for line in text.lines().skip(1) {
        for field in line.split(',').skip(2) {
            let x: f64 = field.parse().unwrap();
            assert_eq!(format!("{x:.16e}"), field);
            checked += 1;
        }
    }
    assert!(checked > 1000);
}

#[test]
fn manifest_hashes_config_and_lists_outputs() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&run_into(dir.path(), &[EXAMPLE, "--duration", "1", "--seed", "3"])), 0);
    let m: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    let digest = Sha256::digest(fs::read(EXAMPLE).unwrap());
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    assert_eq!(m["config_sha256"], hex.as_str());
    assert_eq!(m["seed"], 3);
    assert_eq!(m["steps"], 500);
    assert_eq!(m["exit_code"], 0);
    let outputs: Vec<&str> = m["outputs"].as_array().unwrap().iter().map(|o| o.as_str().unwrap()).collect();
    for name in ["trajectory.csv", "events.csv", "metrics.csv", "manifest.json"] {
        assert!(outputs.iter().any(|o| o.ends_with(name)), "{name}");
    }
    assert!(chrono::DateTime::parse_from_rfc3339(m["started"].as_str().unwrap()).is_ok());
}

#[test]
fn out_dir_comes_from_the_environment() {
    let dir = TempDir::new().unwrap();
    let target = dir.path().join("from-env");
    let out = Command::new(env!("CARGO_BIN_EXE_petc"))
        .args(["run", EXAMPLE, "--duration", "0.5"])
        .env("PETC_OUT_DIR", &target)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(target.join("manifest.json").is_file());
}

#[test]
fn batch_runs_every_file() {
    let (inputs, outs) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let mut v = example_json();
    v["duration"] = serde_json::json!(1.0);
    write_json(inputs.path(), "first.json", &v);
    v["seed"] = serde_json::json!(99);
    write_json(inputs.path(), "second.json", &v);
    fs::write(inputs.path().join("notes.txt"), "ignored").unwrap();
    let out = petc(&["run", "--batch", p(inputs.path()), "--out-dir", p(outs.path())]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for stem in ["first", "second"] {
        assert!(outs.path().join(stem).join("events.csv").is_file(), "{stem}");
    }
    assert!(!outs.path().join("notes").exists());
}

#[test]
fn unstable_open_loop_diverges() {
    let dir = TempDir::new().unwrap();
    let v = serde_json::json!({
        "name": "runaway",
        "plant": {"a": [[3.0]], "b": [[1.0]]},
        "edges": [[0, 1]],
        "x0": [[1.0], [-1.0]],
        "mode": "no_delay",
        "h": 0.01,
        "eta": 1e300,
        "vm_policy": "initial",
        "duration": 40.0
    });
    let f = write_json(dir.path(), "runaway.json", &v);
    let out = run_into(dir.path(), &[p(&f)]);
    assert_eq!(code(&out), 5);
    assert!(stderr(&out).contains("diverged"));
}

#[test]
fn tiny_eta_violates_the_guarantees() {
    let dir = TempDir::new().unwrap();
    let mut v = example_json();
    v["eta"] = serde_json::json!(1e-6);
    let f = write_json(dir.path(), "tiny.json", &v);
    let out = run_into(dir.path(), &[p(&f), "--duration", "2"]);
    assert_eq!(code(&out), 4);
    let m: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["exit_code"], 4);
}

#[test]
fn verify_errors_suite_passes() {
    let out = petc(&["verify", "--suite", "errors"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().all(|l| l.starts_with("PASS ")), "{text}");
}
