use std::path::Path;
use std::process::{Command, Output};

fn vessel(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vessel")).args(args).current_dir(dir).output().unwrap()
}

fn scratch(name: &str) -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("vessel-cli-{name}-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

#[test]
fn validate_passes_and_writes_report() {
    let dir = scratch("validate");
    let out = vessel(&["validate", "--out", "run"], &dir);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    assert!(stdout.contains("PASS sphere_jump_oracle"));
    assert!(!stdout.contains("FAIL "));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("run/report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn malformed_config_exits_with_2() {
    let dir = scratch("bad");
    std::fs::write(dir.join("bad.json"), "{\"geometry\": {\"eps\": -1.0}}").unwrap();
    assert_eq!(vessel(&["solve-1d", "--config", "bad.json"], &dir).status.code(), Some(2));
    std::fs::write(dir.join("broken.json"), "{ not json").unwrap();
    assert_eq!(vessel(&["solve-1d", "--config", "broken.json"], &dir).status.code(), Some(2));
    assert_eq!(vessel(&["solve-1d", "--config", "missing.json"], &dir).status.code(), Some(2));
    assert_eq!(vessel(&["frobnicate"], &dir).status.code(), Some(2));
}

#[test]
fn flipped_normal_fails_the_jump_oracle() {
    let dir = scratch("flip");
    std::fs::write(dir.join("flip.json"), "{\"numerics\": {\"jump_orientation\": -1.0}}").unwrap();
    let out = vessel(&["validate", "--config", "flip.json", "--out", "run"], &dir);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(4), "{stdout}");
    assert!(stdout.contains("FAIL sphere_jump_oracle"));
}

#[test]
fn solve_1d_writes_artifacts() {
    let dir = scratch("solve");
    let out = vessel(&["solve-1d", "--out", "run", "--seed", "7"], &dir);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let csv = std::fs::read_to_string(dir.join("run/solution_1d.csv")).unwrap();
    assert!(csv.lines().count() > 10);
    assert!(dir.join("run/solution_1d.json").exists());
}
