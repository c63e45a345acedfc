use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn regdist(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_regdist"))
        .args(args)
        .arg("--out")
        .arg(out)
        .arg("-q")
        .env_remove("REGDIST_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn manifest(dir: &Path, id: &str) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join(format!("{id}.manifest.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn constants_row_matches_gamma_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let out = regdist(&["constants", "--n", "7", "--d", "2", "--alpha", "1"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("constants.csv")).unwrap();
    let c1: f64 = csv
        .lines()
        .find_map(|l| l.strip_prefix("c1,"))
        .and_then(|v| v.split(',').next())
        .unwrap()
        .parse()
        .unwrap();
    assert!((c1 - 2.0 * std::f64::consts::PI / 3.0).abs() < 1e-7, "c1 = {c1}");
    assert!(csv.contains("c_pde,NA"), "{csv}");
}

#[test]
fn unknown_config_key_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[geometry]\nn = 7\nalpah = 1.0\n").unwrap();
    let out = regdist(&["constants", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("alpah"), "{err}");
    assert!(err.contains("bad.toml"), "{err}");
}

#[test]
fn missing_config_file_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = regdist(&["flat-distance", "--config", "/nonexistent/run.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/run.toml"));
}

#[test]
fn missing_section_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let out = regdist(&["bmo-verify"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bmo"));
}

#[test]
fn zero_tolerance_scale_fails_the_suite() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("acc.toml");
    std::fs::write(&cfg, "[acceptance]\ncriteria = [1, 8]\ntolerance_scale = 0.0\n").unwrap();
    let out = regdist(&["acceptance", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let m = manifest(dir.path(), "acceptance");
    assert_eq!(m["failures"].as_array().unwrap().len(), 2);
}

#[test]
fn manifest_hash_tracks_seed_but_not_output() {
    let cfg = configs().join("flat_distance.toml");
    let cfg = cfg.to_str().unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(regdist(&["flat-distance", "--config", cfg], a.path()).status.success());
    assert!(regdist(&["flat-distance", "--config", cfg, "--format", "json"], b.path()).status.success());
    let (ma, mb) = (manifest(a.path(), "flat-distance"), manifest(b.path(), "flat-distance"));
    assert_eq!(ma["config_hash"], mb["config_hash"]);
    assert_eq!(ma["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(ma["rows"], 50);
    assert!(b.path().join("flat-distance.json").exists());

    assert!(regdist(&["flat-distance", "--config", cfg, "--seed", "9"], b.path()).status.success());
    let mc = manifest(b.path(), "flat-distance");
    assert_ne!(ma["config_hash"], mc["config_hash"]);
    assert_eq!(mc["seed"], 9);
}

#[test]
fn reruns_are_byte_identical() {
    let cfg = configs().join("magic.toml");
    let cfg = cfg.to_str().unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(regdist(&["magic-check", "--config", cfg, "--jobs", "1"], a.path()).status.success());
    assert!(regdist(&["magic-check", "--config", cfg, "--jobs", "3"], b.path()).status.success());
    let read = |d: &Path| std::fs::read(d.join("magic-check.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn measure_file_overrides_config_measure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("magic.toml");
    let measure = configs().join("cantor.toml");
    let out = regdist(
        &["magic-check", "--config", cfg.to_str().unwrap(), "--measure", measure.to_str().unwrap()],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("magic-check.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap().split(',').count(), 7);
    assert_eq!(csv.lines().count(), 6);
}

#[test]
fn example_configs_run_clean() {
    for (cmd, file) in [
        ("nt-limit", "nt_limit.toml"),
        ("linearized-spectrum", "spectrum.toml"),
        ("flat-functional", "functional.toml"),
        ("pde-residual", "pde.toml"),
    ] {
        let dir = tempfile::tempdir().unwrap();
        let cfg = configs().join(file);
        let out = regdist(&[cmd, "--config", cfg.to_str().unwrap()], dir.path());
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(manifest(dir.path(), cmd)["subcommand"], cmd);
    }
}
