use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ionwave(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ionwave"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn check_pressure_passes_for_power_family() {
    let dir = tempfile::tempdir().unwrap();
    let out = ionwave(
        dir.path(),
        &["check-pressure", "--set", "pressure.gamma=2", "--set", "pressure.kappa=0.5", "--output-dir", "o"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&dir.path().join("o/admissibility.json"))["pass"], Value::Bool(true));
}

#[test]
fn bifurcation_point_reports_c0() {
    let dir = tempfile::tempdir().unwrap();
    let out = ionwave(dir.path(), &["bifurcation-point", "--output-dir", "o"]);
    assert_eq!(out.status.code(), Some(0));
    let stdout: Value = serde_json::from_slice(&out.stdout).unwrap();
    let c0 = stdout["c0_continuum"].as_f64().unwrap();
    assert!((c0 - 1.224744871).abs() < 1e-9);
    assert_eq!(stdout, json(&dir.path().join("o/bifurcation_point.json")));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(ionwave(p, &["check-pressure", "--set", "pressure.kappa=-1"]).status.code(), Some(1));
    assert_eq!(ionwave(p, &["check-pressure", "--set", "bogus=1"]).status.code(), Some(1));
    assert_eq!(ionwave(p, &["bifurcation-point", "--config", "missing.json"]).status.code(), Some(1));
    let inadmissible = r#"pressure={"family":"custom","terms":[[-1,2]]}"#;
    let out = ionwave(p, &["check-pressure", "--set", inadmissible, "--output-dir", "o"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("witness"));

    // A corrector allowed a single iteration cannot converge at all.
    let out = ionwave(
        p,
        &["trace-branch", "--grid-M", "64", "--set", "continuation.max_corrector_iters=1", "--set", "continuation.ds_min=1e-3", "--output-dir", "u"],
    );
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(p.join("u/branch.csv").exists());

    // An amplitude floor above the trough gap trips the monitor at the seed.
    let out = ionwave(p, &["trace-branch", "--grid-M", "64", "--set", "continuation.amplitude_floor=10", "--output-dir", "m"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("amplitude_gap"));
    assert_eq!(json(&p.join("m/branch.json"))["flagged"], serde_json::json!([0]));
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(
        p.join("run.json"),
        r#"{"pressure": {"family": "log", "kappa": 1.5}, "L": 5.0, "grid_M": 128, "output_dir": "cfg_out"}"#,
    )
    .unwrap();
    let out = ionwave(p, &["bifurcation-point", "--config", "run.json", "--grid-M", "64"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&p.join("cfg_out/bifurcation_point.json"));
    assert_eq!(v["nodes"], 64);
    assert_eq!(v["period"], 5.0);
    let out = ionwave(p, &["bifurcation-point", "--config", "run.json", "--set", "continuation.grid_m=64"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn psi2_prints_documented_keys() {
    let dir = tempfile::tempdir().unwrap();
    let out = ionwave(dir.path(), &["psi2", "--pressure", "custom:terms=1@2", "--L", "6.283185307179586", "--output-dir", "o"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    for key in ["c0", "A", "B", "psi2_operator", "psi2_poly", "a_coeffs", "exceptional_periods"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["exceptional_periods"], serde_json::json!([]));
}

#[test]
fn solve_elliptic_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let m = 64;
    let l = std::f64::consts::TAU;
    let mut csv = String::from("x,f\n");
    for j in 0..m {
        let x = -l / 2.0 + j as f64 * l / m as f64;
        csv.push_str(&format!("{:.17e},{:.17e}\n", x, 1.0 + 0.3 * x.cos()));
    }
    fs::write(p.join("f.csv"), csv).unwrap();
    let out = ionwave(p, &["solve-elliptic", "--input", "f.csv", "--output-dir", "o"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&p.join("o/elliptic_report.json"));
    assert_eq!(report["maximum_principle"], Value::Bool(true));
    let phi = fs::read_to_string(p.join("o/phi.csv")).unwrap();
    assert!(phi.starts_with("x,phi\n"));
    assert_eq!(phi.lines().count(), m + 1);

    fs::write(p.join("neg.csv"), "x,f\n-1,1\n-0.5,-1\n0,1\n0.5,-1\n").unwrap();
    assert_eq!(ionwave(p, &["solve-elliptic", "--input", "neg.csv"]).status.code(), Some(1));
}

#[test]
fn resume_matches_uninterrupted_trace_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let full = ionwave(p, &["trace-branch", "--grid-M", "256", "--output-dir", "full"]);
    assert_eq!(full.status.code(), Some(0));
    let short = ionwave(p, &["trace-branch", "--grid-M", "256", "--set", "continuation.max_steps=3", "--output-dir", "part"]);
    assert_eq!(short.status.code(), Some(0));
    assert_eq!(json(&p.join("part/branch.json"))["stop_reason"], "max_steps");
    let resumed = ionwave(p, &["resume", "--checkpoint", "part/checkpoint.json", "--max-steps", "500"]);
    assert_eq!(resumed.status.code(), Some(0), "{}", String::from_utf8_lossy(&resumed.stderr));
    let a = fs::read(p.join("full/branch.csv")).unwrap();
    let b = fs::read(p.join("part/branch.csv")).unwrap();
    assert_eq!(a, b);
    assert_eq!(json(&p.join("part/branch.json"))["stop_reason"], "touched");
}

#[test]
fn limit_wave_from_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(ionwave(p, &["trace-branch", "--grid-M", "512", "--output-dir", "o"]).status.code(), Some(0));
    let out = ionwave(p, &["limit-wave", "--checkpoint", "o/checkpoint.json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&p.join("o/limit_wave.json"));
    assert!(v["slope_relative_error"].as_f64().unwrap() < 0.05);
    assert!(p.join("o/limit_profile.csv").exists());
    let out = ionwave(p, &["limit-wave", "--checkpoint", "o/checkpoint.json", "--grid-M", "1024"]);
    assert_eq!(out.status.code(), Some(1));
}
