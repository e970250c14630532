use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stopbound"))
}

fn preset(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("presets")
        .join(name)
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn benchmark_prints_thresholds() {
    let out = bin()
        .args(["benchmark", "--config"])
        .arg(preset("fig2.cfg"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!((v["y_star"].as_f64().unwrap() - 56.0).abs() < 1e-12);
    assert!((v["x_star"].as_f64().unwrap() - 100.361263).abs() < 1e-6);
}

#[test]
fn usage_errors_exit_with_two() {
    let out = bin().arg("solve").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_input_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "r = 0.1\nalpha1 = 0.2\n").unwrap();
    let out = bin()
        .args(["benchmark", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));

    let out = bin()
        .args(["value", "--config"])
        .arg(preset("fig1.cfg"))
        .args(["--boundary", "/no/such.csv", "--x", "1", "--y", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/no/such.csv"));
}

#[test]
fn solve_writes_artifacts_and_feeds_value_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("run").join("boundary.csv");
    let out = bin()
        .args(["solve", "--config"])
        .arg(preset("fig1.cfg"))
        .args(["--samples", "20000", "--grid", "20", "--out"])
        .arg(&csv)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let run = dir.path().join("run");
    assert!(run.join("boundary.report.json").exists());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "solve");
    assert_eq!(manifest["artifacts"].as_object().unwrap().len(), 2);
    assert!(fs::read_to_string(&csv).unwrap().starts_with("x,b\n0,56\n"));

    let out = bin()
        .args(["value", "--config"])
        .arg(preset("fig1.cfg"))
        .arg("--boundary")
        .arg(&csv)
        .args(["--x", "40", "--y", "20", "--samples", "20000"])
        .output()
        .unwrap();
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(v["mean"].as_f64().unwrap() > 1714.0);

    let out = bin()
        .arg("compare")
        .arg(&csv)
        .arg(&csv)
        .arg("--strict")
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["sup_abs_diff"].as_f64(), Some(0.0));
}

#[test]
fn check_psi_prints_one_row_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let b = dir.path().join("b.csv");
    fs::write(&b, "x,b\n0,56\n50,14\n100.36126343151007,0\n").unwrap();
    let pts = dir.path().join("p.csv");
    fs::write(&pts, "x,y\n10,40\n60,10\n").unwrap();
    let out = bin()
        .args(["check-psi", "--config"])
        .arg(preset("fig1.cfg"))
        .arg("--boundary")
        .arg(&b)
        .arg("--points")
        .arg(&pts)
        .args(["--samples", "20000"])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x,y,mc_estimate,mc_se,quadrature,z_score");
    assert_eq!(lines.len(), 3);
    for row in &lines[1..] {
        let z: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
        assert!(z.abs() < 5.0, "{row}");
    }
}

#[test]
fn oracle_on_a_coarse_grid() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("pde.csv");
    let out = bin()
        .args(["oracle", "--config"])
        .arg(preset("fig1.cfg"))
        .args(["--nx", "60", "--ny", "60", "--out"])
        .arg(&csv)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.path().join("pde.report.json").exists());
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn sweep_rejects_unsorted_values() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["sweep", "--config"])
        .arg(preset("fig1.cfg"))
        .args(["--param", "sigma2", "--values", "0.2,0.1", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}
