//! End-to-end runs of the built binary: exit codes, byte-identical reruns
//! and worker-count invariance of the emitted files.

use std::fs;
use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_modalsim");

const GEIGER: &str = r#"
scenario = "decay_geiger"
seed = 42
n_trajectories = 2000

[parameters]
gamma = 1.0
eta = 0.02
n_steps = 60
"#;

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn run_geiger(workers: &str) -> Vec<(String, Vec<u8>)> {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("geiger.toml"), GEIGER).unwrap();
    let status = Command::new(BIN)
        .current_dir(dir.path())
        .env("MODALSIM_WORKERS", workers)
        .args(["run", "geiger.toml"])
        .status()
        .unwrap();
    assert!(status.success());
    read_dir_bytes(&dir.path().join("out"))
}

#[test]
fn reruns_are_byte_identical_and_worker_invariant() {
    let base = run_geiger("2");
    assert!(base.iter().any(|(name, _)| name == "manifest.json"));
    assert_eq!(base, run_geiger("2"), "identical rerun changed bytes");
    assert_eq!(base, run_geiger("1"), "worker count 1 changed values");
    assert_eq!(base, run_geiger("7"), "worker count 7 changed values");
}

#[test]
fn seed_override_changes_the_data() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("geiger.toml"), GEIGER).unwrap();
    for (out, seed) in [("a", "42"), ("b", "43")] {
        let status = Command::new(BIN)
            .current_dir(dir.path())
            .args(["run", "geiger.toml", "--seed", seed, "--out", out])
            .status()
            .unwrap();
        assert!(status.success());
    }
    let a = fs::read(dir.path().join("a/decay_geiger.csv")).unwrap();
    let b = fs::read(dir.path().join("b/decay_geiger.csv")).unwrap();
    assert_ne!(a, b, "different seeds produced identical ensembles");
}

#[test]
fn invalid_config_exits_2_and_reports_every_key() {
    let dir = tempfile::tempdir().unwrap();
    let bad = r#"
scenario = "decay_geiger"
surprise = 1

[parameters]
gamma = 5.0
eta = 0.1
n_steps = 10
"#;
    fs::write(dir.path().join("bad.toml"), bad).unwrap();
    let output = Command::new(BIN)
        .current_dir(dir.path())
        .args(["validate", "bad.toml"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("surprise"), "unknown key not named: {stderr}");
    assert!(stderr.contains("gamma * eta < 0.1"), "regime bound not named: {stderr}");
}

#[test]
fn missing_config_file_exits_2() {
    let status = Command::new(BIN).args(["run", "/nonexistent/x.toml"]).status().unwrap();
    assert_eq!(status.code(), Some(2));
}
