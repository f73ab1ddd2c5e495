use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bogoliubov"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin().arg("run").arg(config).arg("--output-dir").arg(out).args(extra).output().unwrap()
}

fn read_json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const FLRW: &str = r#"{"scenario": "flrw", "flrw": {"A": 2.5, "B": 1.5, "rho": 1.0, "mass": 0.1, "L": 1000.0, "n_max": 5}}"#;

fn asymptote(n: f64) -> f64 {
    let k = 2.0 * PI * n / 1000.0;
    let w_in = (k * k + 0.01 * 1.0).sqrt();
    let w_out = (k * k + 0.01 * 4.0).sqrt();
    (PI * (w_out - w_in) / 2.0).sinh().powi(2) / ((PI * w_in).sinh() * (PI * w_out).sinh())
}

#[test]
fn flrw_run_writes_plot_ready_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "fig.json", FLRW);
    let out = run(&cfg, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("fig.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,beta_sq_1,beta_sq_2,beta_sq_3,beta_sq_4,beta_sq_5,oracle_1,oracle_2,oracle_3,oracle_4,oracle_5"
    );
    let last: Vec<f64> = csv.lines().last().unwrap().split(',').map(|c| c.parse().unwrap()).collect();
    for n in 1..=5 {
        let expected = asymptote(n as f64);
        assert!((last[n] / expected - 1.0).abs() < 0.01);
        assert!((last[5 + n] - expected).abs() < 1e-12 * expected);
    }
    let record = read_json(dir.path().join("fig.json"));
    assert_eq!(record["metadata"]["converged"], Value::Bool(true));
    assert_eq!(record["identity_residuals"].as_array().unwrap().len(), 6);
    assert!(record["oracle_comparisons"].as_array().unwrap().iter().all(|c| c["pass"] == Value::Bool(true)));
}

#[test]
fn csv_is_bit_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "fig.json", FLRW);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run(&cfg, &a, &[]).status.success());
    let single = bin().env("BOGOLIUBOV_WORKERS", "1").arg("run").arg(&cfg).arg("--output-dir").arg(&b).output().unwrap();
    assert!(single.status.success());
    let first = std::fs::read(a.join("fig.csv")).unwrap();
    assert_eq!(first, std::fs::read(b.join("fig.csv")).unwrap());
}

#[test]
fn config_hash_matches_canonical_input() {
    let dir = tempfile::tempdir().unwrap();
    let reordered = r#"{
        "flrw": {"n_max": 5, "L": 1000.0, "mass": 0.1, "rho": 1.0, "B": 1.5, "A": 2.5},
        "scenario": "flrw"
    }"#;
    let cfg = write_config(dir.path(), "one.json", FLRW);
    let other = write_config(dir.path(), "two.json", reordered);
    assert!(run(&cfg, dir.path(), &[]).status.success());
    assert!(run(&other, dir.path(), &[]).status.success());
    let h1 = read_json(dir.path().join("one.json"))["metadata"]["config_hash"].clone();
    let h2 = read_json(dir.path().join("two.json"))["metadata"]["config_hash"].clone();
    assert_eq!(h1, h2);
    // serde_json maps without preserve_order serialize with sorted keys
    let canonical = serde_json::to_string(&serde_json::from_str::<Value>(FLRW).unwrap()).unwrap();
    let digest: String = Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
    assert_eq!(h1, Value::String(digest));
}

#[test]
fn cubic_cavity_has_empty_resonance_section() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "cube.json",
        r#"{"scenario": "gw_cavity", "gw_cavity": {"lengths": [1.0, 1.0, 1.0], "epsilon": 1e-5}}"#,
    );
    let out = run(&cfg, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0));
    let record = read_json(dir.path().join("cube.json"));
    assert_eq!(record["resonance_report"], Value::Array(vec![]));
    assert_eq!(std::fs::read_to_string(dir.path().join("cube.csv")).unwrap().lines().next(), Some("t"));
}

#[test]
fn resonant_cavity_reports_one_channel() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "gw.json",
        r#"{"scenario": "gw_cavity", "gw_cavity": {"lengths": [1.0, 2.0, 1.0], "epsilon": 1e-5}, "seed": 3,
            "output": {"format": "json"}}"#,
    );
    let out = run(&cfg, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!dir.path().join("gw.csv").exists());
    let record = read_json(dir.path().join("gw.json"));
    let report = record["resonance_report"].as_array().unwrap();
    assert_eq!(report.len(), 1);
    assert_eq!(report[0]["n"], "(1,1,1)");
    assert!((report[0]["rate_re"].as_f64().unwrap() - 1e-5 * PI / 8.0).abs() < 1e-18);
    assert_eq!(record["series"]["columns"][1], "beta_sq_1_1_1");
}

#[test]
fn invalid_scale_factor_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.json", &FLRW.replace("\"A\": 2.5", "\"A\": 1.0"));
    let out = run(&cfg, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("a(eta)") && err.contains("A > |B|"), "{err}");
}

#[test]
fn structural_errors_exit_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        r#"{"scenario": "gw_cavity", "flrw": {"A": 2.5, "B": 1.5, "rho": 1.0, "mass": 0.1, "L": 1000.0, "n_max": 5}}"#.to_string(),
        FLRW.replace("}}", r#"}, "custom": {}}"#),
        FLRW.replace("}}", r#"}, "tolerances": {"oracle": 0.0}}"#),
        FLRW.replace("\"n_max\"", "\"nmax\""),
        "{ not json".to_string(),
    ];
    for (i, body) in cases.iter().enumerate() {
        let cfg = write_config(dir.path(), &format!("c{i}.json"), body);
        assert_eq!(run(&cfg, dir.path(), &[]).status.code(), Some(1), "{body}");
    }
    let cfg = write_config(dir.path(), "ok.json", FLRW);
    assert_eq!(run(&cfg, dir.path(), &["--tol=-1"]).status.code(), Some(1));
    assert_eq!(run(&cfg, dir.path(), &["--bogus"]).status.code(), Some(1));
}

#[test]
fn step_underflow_exits_with_numerical_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "fig.json", FLRW);
    let out = run(&cfg, dir.path(), &["--tol", "1e-300", "--n-modes", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("step size underflow"));
}

#[test]
fn oracle_mismatch_exits_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "tight.json", &FLRW.replace("}}", r#"}, "tolerances": {"oracle": 1e-14}}"#));
    let out = run(&cfg, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("oracle mismatch"));
    assert!(dir.path().join("tight.json").exists());
}

#[test]
fn mode_override_changes_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "fig.json", FLRW);
    assert!(run(&cfg, dir.path(), &["--n-modes", "2"]).status.success());
    let csv = std::fs::read_to_string(dir.path().join("fig.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,beta_sq_1,beta_sq_2,oracle_1,oracle_2");
}

#[test]
fn custom_scenario_tracks_every_mode() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "torus.json",
        r#"{"scenario": "custom", "custom": {"lengths": [6.0], "boundary": "periodic", "mass": 0.9,
            "scale": {"A": 2.0, "B": 0.5, "rho": 0.7}, "t0": -4.0, "tf": 4.0, "n_modes": 3, "samples": 9}}"#,
    );
    let out = run(&cfg, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("torus.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,alpha_sq_-1,alpha_sq_0,alpha_sq_1,beta_sq_-1,beta_sq_0,beta_sq_1");
    assert_eq!(csv.lines().count(), 10);
    let record = read_json(dir.path().join("torus.json"));
    let residuals = record["identity_residuals"].as_array().unwrap();
    assert_eq!(residuals.len(), 8);
    assert!(residuals.iter().all(|r| r["value"].as_f64().unwrap() < 1e-8));
    for line in csv.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        for i in 1..=3 {
            // |α_nn|² - Σ_m |β_nm|² = 1 because momentum is conserved on the torus
            assert!((v[i] - v[i + 3] - 1.0).abs() < 1e-8);
        }
    }
}

#[test]
fn validate_flags_massless_neumann_box() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "box.json",
        r#"{"scenario": "custom", "custom": {"lengths": [1.0, 1.5], "boundary": "neumann",
            "scale": {"A": 1.0, "B": 0.1, "rho": 1.0}, "t0": -5.0, "tf": 5.0}}"#,
    );
    let out = bin().arg("validate").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("positive semidefinite") && text.contains("regularize_zero_mode"), "{text}");
    let fixed = write_config(
        dir.path(),
        "fixed.json",
        &std::fs::read_to_string(&cfg).unwrap().replace("\"neumann\",", "\"neumann\", \"mass_regulator\": 0.001,"),
    );
    assert_eq!(bin().arg("validate").arg(&fixed).output().unwrap().status.code(), Some(0));
}

#[test]
fn validate_accepts_valid_flrw() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "fig.json", FLRW);
    let out = bin().arg("validate").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(!text.contains("FAIL") && text.contains("condition D"));
}

#[test]
fn validate_rejects_vanishing_robin_coefficient() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "robin.json",
        r#"{"scenario": "custom", "custom": {"lengths": [1.0], "boundary": {"robin": 0.0}, "mass": 0.5,
            "scale": {"A": 1.0, "B": 0.1, "rho": 1.0}, "t0": -5.0, "tf": 5.0}}"#,
    );
    let out = bin().arg("validate").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL  boundary"));
    assert_eq!(run(&cfg, dir.path(), &[]).status.code(), Some(1));
}
