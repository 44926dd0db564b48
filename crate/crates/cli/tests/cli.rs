use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scalcurv")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string(v).unwrap()).unwrap();
    p
}

/// Quadratic field on `S^6` with two maxima and two saddles of negative Laplacian.
fn field_json() -> Value {
    let n = 6;
    let m = n + 1;
    let mut a = vec![vec![0.0; m]; m];
    for (k, row) in a.iter_mut().enumerate().take(n) {
        row[k] = 0.05 * (k + 1) as f64;
    }
    a[n][n] = 1.0;
    a[0][n] = 0.1;
    a[n][0] = 0.1;
    let mut coeffs = vec![2.0; 1];
    coeffs.extend([0.0, 0.05, 0.0, 0.0, 0.0, 0.0, 0.3]);
    json!({ "field": { "family": "polynomial", "coeffs": coeffs, "matrix": a } })
}

fn single_config() -> Value {
    json!({
        "n": 6,
        "tau": 0.0,
        "field": { "family": "affine", "coeffs": [2, 0, 0, 0, 0, 0, 0, 1] },
        "bubbles": [{ "alpha": 1.0, "center": [0, 0, 0, 0, 0, 0, 1], "lambda": 20.0 }]
    })
}

#[test]
fn verify_constants_passes_with_flags() {
    let o = run(&["verify-constants", "--dim", "4", "--tol", "1e-9"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.lines().any(|l| l.starts_with("FLAG")));
    assert!(!text.lines().any(|l| l.starts_with("FAIL")));
}

#[test]
fn constants_table_formats() {
    let o = run(&["constants", "--dim", "5"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["n"], 5);
    assert!(v["entries"]["bar_c0"]["value"].as_f64().unwrap() > 0.0);
    let o = run(&["constants", "--dim", "5", "--format", "csv"]);
    assert!(stdout(&o).starts_with("name,value,closed_form,chain"));
    assert_eq!(code(&run(&["constants", "--dim", "2"])), 2);
}

#[test]
fn missing_config_is_invalid_input() {
    let o = run(&["expand", "--config", "missing.json"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.json"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&run(&["frobnicate"])), 2);
    assert_eq!(code(&run(&["scan", "--dim", "6"])), 2);
}

#[test]
fn expand_reports_energy_and_gradient() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "cfg.json", &single_config());
    let o = run(&["expand", "--config", cfg.to_str().unwrap(), "--gradient"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["energy"]["value"].as_f64().unwrap() > 0.0);
    assert_eq!(v["gradient"]["lambda"].as_array().unwrap().len(), 1);
    assert!(v["error_budget"].as_f64().unwrap() > 0.0);
}

#[test]
fn oracle_and_compare_agree_with_expansion() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "cfg.json", &single_config());
    let o = run(&["oracle", "--config", cfg.to_str().unwrap(), "--level", "3"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["j"].as_f64().unwrap() > 0.0);

    let o = run(&["compare", "--config", cfg.to_str().unwrap(), "--lambda-schedule", "10,20,40", "--level", "4"]);
    assert_eq!(code(&o), 0);
    let mut r = csv::Reader::from_reader(o.stdout.as_slice());
    assert_eq!(r.headers().unwrap(), vec!["lambda", "J_direct", "J_reduced", "gap", "budget", "ratio"]);
    let rows: Vec<Vec<f64>> = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|s| s.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[2][3] < rows[0][3]);
    assert!(rows.iter().all(|row| row[5] < 10.0));
}

#[test]
fn tower_scan_writes_csv_and_summary() {
    let dir = TempDir::new().unwrap();
    let k = write(dir.path(), "k.json", &field_json());
    let o = run(&["scan", "--scenario", "tower", "--dim", "6", "--tau", "1e-4", "--k", k.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.starts_with("lambda_ratio,base_sigma,gradient_norm,lower_bound,ratio"));
    assert_eq!(text.lines().count(), 1 + 144);
    let summary: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert!(summary["min_ratio"].as_f64().unwrap() > 0.05);

    let out = dir.path().join("rows.csv");
    let o = run(&[
        "scan", "--scenario", "tower", "--dim", "6", "--tau", "1e-4", "--k", k.to_str().unwrap(), "--points", "3",
        "--csv", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let summary: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(summary["grid_size"], 9);
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 10);
}

#[test]
fn scan_rejects_bad_input() {
    let dir = TempDir::new().unwrap();
    let k = write(dir.path(), "k.json", &field_json());
    let ks = k.to_str().unwrap();
    assert_eq!(code(&run(&["scan", "--scenario", "spiral", "--dim", "6", "--tau", "1e-4", "--k", ks])), 2);
    assert_eq!(code(&run(&["scan", "--scenario", "tower", "--dim", "5", "--tau", "1e-4", "--k", ks])), 2);
}

#[test]
fn solve_converges_at_a_maximum() {
    let dir = TempDir::new().unwrap();
    let k = write(dir.path(), "k.json", &field_json());
    let o = run(&[
        "solve", "--config", k.to_str().unwrap(), "--tau", "1e-4", "--dim", "6", "--points",
        "0.0897288696354253,0.023592438652446538,0,0,0,0,0.995686761382504",
    ]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["refinement"]["status"], "converged");
    let pred = v["prediction"]["predictions"][0]["lambda"].as_f64().unwrap();
    let refined = v["refinement"]["config"]["bubbles"][0]["lambda"].as_f64().unwrap();
    assert!((pred - refined).abs() / refined < 0.05);
}

#[test]
fn solve_reports_non_convergence() {
    // The saddles carry lambda near 9 at this tau, outside the reach of the expansion.
    let dir = TempDir::new().unwrap();
    let k = write(dir.path(), "k.json", &field_json());
    let o = run(&["solve", "--config", k.to_str().unwrap(), "--tau", "1e-4", "--dim", "6"]);
    assert_eq!(code(&o), 3);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["prediction"]["predictions"].as_array().unwrap().len(), 4);
    assert_ne!(v["refinement"]["status"], "converged");
}

#[test]
fn decompose_recovers_the_bubble() {
    let dir = TempDir::new().unwrap();
    let input = write(
        dir.path(),
        "ens.json",
        &json!({
            "n": 5,
            "linear": [0.01, 0, 0, 0, 0, 0],
            "bubbles": [{ "alpha": 1.0, "center": [0, 0, 0, 0, 0, 1], "lambda": 15.0 }],
            "init": [{ "alpha": 0.99, "center": [0, 0, 0, 0, 0, 1], "lambda": 15.2 }]
        }),
    );
    let o = run(&["decompose", "--input", input.to_str().unwrap(), "--q", "1", "--level", "3"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["v_norm_sq"].as_f64().unwrap() < 1e-3 * v["u_norm_sq"].as_f64().unwrap());
    assert!(v["local_min_warning"].is_null());
    let o = run(&["decompose", "--input", input.to_str().unwrap(), "--q", "2"]);
    assert_eq!(code(&o), 2);
}
