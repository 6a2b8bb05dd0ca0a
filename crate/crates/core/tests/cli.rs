use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dfm::cli::exit;
use dfm::trace::CSV_HEADER;
use serde_json::Value;
use tempfile::TempDir;

fn dfm(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dfm"))
        .args(args)
        .env("DFM_OUT_DIR", out)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn summary(dir: &Path, file: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join(file)).unwrap()).unwrap()
}

#[test]
fn naive_example_one_is_flagged_as_stuck() {
    let dir = TempDir::new().unwrap();
    let o = dfm(&["run", "--builtin", "example1", "--method", "naive", "--rounds", "100"], dir.path());
    assert_eq!(code(&o), exit::SUCCESS, "{}", String::from_utf8_lossy(&o.stderr));

    let s = summary(dir.path(), "example1_naive.json");
    assert_eq!(s["final_allocation"], serde_json::json!([[0.0], [0.0], [0.0], [1.0]]));
    assert_eq!(s["stationary_at_non_optimal"], Value::Bool(true));
    assert_eq!(s["reachability"]["holds"], Value::Bool(false));

    let csv = fs::read_to_string(dir.path().join("example1_naive.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some(CSV_HEADER));
}

#[test]
fn dfm_with_the_extra_edge_reaches_the_optimum() {
    let dir = TempDir::new().unwrap();
    let o = dfm(&["run", "--builtin", "example1", "--add-edge-14"], dir.path());
    assert_eq!(code(&o), exit::SUCCESS);
    let s = summary(dir.path(), "example1_edge14_dfm.json");
    let x: Vec<f64> = s["final_allocation"]
        .as_array()
        .unwrap()
        .iter()
        .map(|b| b[0].as_f64().unwrap())
        .collect();
    for (got, want) in x.iter().zip([0.5, 0.0, 0.0, 0.5]) {
        assert!((got - want).abs() < 1e-6, "{x:?}");
    }
    assert_eq!(s["feasible"], Value::Bool(true));
    assert_eq!(s["stationary_at_non_optimal"], Value::Bool(false));
}

#[test]
fn explicit_out_overrides_the_environment() {
    let env_dir = TempDir::new().unwrap();
    let out_dir = TempDir::new().unwrap();
    let out = out_dir.path().to_str().unwrap();
    let o = dfm(&["run", "--builtin", "example2", "--rounds", "5", "--out", out], env_dir.path());
    assert_eq!(code(&o), exit::SUCCESS);
    assert!(out_dir.path().join("example2_dfm.csv").exists());
    assert!(!env_dir.path().join("example2_dfm.csv").exists());
}

#[test]
fn rho_sweep_writes_one_trace_per_weight() {
    let dir = TempDir::new().unwrap();
    let o = dfm(
        &["run", "--builtin", "example2", "--add-edge-14", "--rho-list", "1e-2,1e-3", "--rounds", "50"],
        dir.path(),
    );
    assert_eq!(code(&o), exit::SUCCESS);
    assert!(dir.path().join("example2_edge14_dfm_rho0.csv").exists());
    assert!(dir.path().join("example2_edge14_dfm_rho1.csv").exists());
    let s = summary(dir.path(), "example2_edge14_dfm.json");
    let runs = s.as_array().unwrap();
    assert_eq!(runs.len(), 2);
    // A smaller weight lets the end nodes move closer to their targets.
    let f0 = runs[0]["final_objective"]["f"].as_f64().unwrap();
    let f1 = runs[1]["final_objective"]["f"].as_f64().unwrap();
    assert!(f1 < f0);
}

#[test]
fn traces_do_not_depend_on_thread_count() {
    let mut traces = Vec::new();
    for threads in ["1", "2", "8"] {
        let dir = TempDir::new().unwrap();
        let o = dfm(
            &["run", "--builtin", "dispatch", "--rounds", "40", "--threads", threads, "--no-timing"],
            dir.path(),
        );
        assert_eq!(code(&o), exit::SUCCESS);
        traces.push(fs::read(dir.path().join("dispatch_dfm.csv")).unwrap());
    }
    assert_eq!(traces[0], traces[1]);
    assert_eq!(traces[0], traces[2]);
}

#[test]
fn check_reports_reachability_through_the_exit_code() {
    let dir = TempDir::new().unwrap();
    let o = dfm(&["check", "--builtin", "example1"], dir.path());
    assert_eq!(code(&o), exit::NOT_REACHABLE);
    assert!(String::from_utf8_lossy(&o.stdout).contains("reachability: fails"));

    let o = dfm(&["check", "--builtin", "example1", "--add-edge-14"], dir.path());
    assert_eq!(code(&o), exit::SUCCESS);
    assert!(String::from_utf8_lossy(&o.stdout).contains("reachability: holds"));
}

#[test]
fn usage_errors() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&dfm(&["run"], dir.path())), exit::USAGE);
    assert_eq!(
        code(&dfm(&["run", "--builtin", "example2", "--rho", "1e-3", "--epsilon", "0.1"], dir.path())),
        exit::USAGE
    );
    assert_eq!(code(&dfm(&["run", "--builtin", "example2", "--rho", "-1"], dir.path())), exit::USAGE);
}

#[test]
fn file_errors() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("missing.json");
    let o = dfm(&["run", "--instance", missing.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), exit::IO);

    let broken = dir.path().join("broken.json");
    fs::write(&broken, "{\n  \"rhs\": [1.0],\n  \"nodes\": [,]\n}\n").unwrap();
    let o = dfm(&["run", "--instance", broken.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), exit::PARSE);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    let case = dir.path().join("bad.m");
    fs::write(&case, "function mpc = bad\nmpc.gen = [\n").unwrap();
    let o = dfm(&["run", "--case", case.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), exit::PARSE);
}

#[test]
fn infeasible_instance_is_rejected() {
    let dir = TempDir::new().unwrap();
    // x ∈ [0, 1] for both nodes but x_1 + x_2 = 3.
    let text = r#"{
  "name": "too-much",
  "rho": 0.01,
  "rhs": [3.0],
  "edges": [[0, 1]],
  "nodes": [
    {
      "cost": { "type": "quadratic", "q": [[1.0]], "linear": [0.0] },
      "coupling": [[1.0]],
      "constraints": [
        { "type": "affine", "normal": [-1.0], "offset": 0.0 },
        { "type": "affine", "normal": [1.0], "offset": -1.0 }
      ]
    },
    {
      "cost": { "type": "quadratic", "q": [[1.0]], "linear": [0.0] },
      "coupling": [[1.0]],
      "constraints": [
        { "type": "affine", "normal": [-1.0], "offset": 0.0 },
        { "type": "affine", "normal": [1.0], "offset": -1.0 }
      ]
    }
  ]
}
"#;
    let path = dir.path().join("too_much.json");
    fs::write(&path, text).unwrap();
    let o = dfm(&["run", "--instance", path.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), exit::INFEASIBLE_START, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn native_instance_runs_from_its_stored_start() {
    let dir = TempDir::new().unwrap();
    let text = r#"{
  "name": "pair",
  "rho": 0.001,
  "rhs": [1.0],
  "edges": [[0, 1]],
  "initial": [[0.5], [0.5]],
  "nodes": [
    {
      "cost": { "type": "quadratic", "q": [[1.0]], "linear": [-1.0] },
      "coupling": [[1.0]],
      "constraints": [{ "type": "affine", "normal": [-1.0], "offset": 0.0 }]
    },
    {
      "cost": { "type": "quadratic", "q": [[1.0]], "linear": [0.0] },
      "coupling": [[1.0]],
      "constraints": [{ "type": "affine", "normal": [-1.0], "offset": 0.0 }]
    }
  ]
}
"#;
    let path = dir.path().join("pair.json");
    fs::write(&path, text).unwrap();
    let o = dfm(&["run", "--instance", path.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), exit::SUCCESS, "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(dir.path(), "pair_dfm.json");
    assert_eq!(s["initial_allocation"], serde_json::json!([[0.5], [0.5]]));
    let x0 = s["final_allocation"][0][0].as_f64().unwrap();
    // Minimizer of ½x₀² - x₀ + ½x₁² on x₀ + x₁ = 1 is (1, 0); the barrier keeps x₁ > 0.
    assert!(x0 > 0.9 && x0 < 1.0, "{x0}");
}
