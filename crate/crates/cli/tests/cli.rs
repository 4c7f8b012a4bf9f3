use std::fs;
use std::path::Path;
use std::process::Command;

use rwl_cli::ExperimentConfig;
use serde_json::Value;

fn rwl() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_rwl"));
    c.env("RUST_LOG", "warn");
    c
}

fn small_config(out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig { depth: 7, out: out.to_path_buf(), ..Default::default() };
    cfg.suite.random = 8;
    cfg.suite.atoms = 4;
    cfg.suite.packets = 2;
    cfg.suite.preimages = 2;
    cfg.identity_fields = 4;
    cfg.semenov_budget.probes = 8;
    cfg.semenov_budget.restarts = 2;
    cfg.mus = vec![1, 2, 4];
    cfg
}

fn write_config(dir: &Path, cfg: &ExperimentConfig) -> std::path::PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, cfg.to_json()).unwrap();
    path
}

fn report(dir: &Path) -> Value {
    serde_json::from_slice(&fs::read(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn haar_admissibility_is_reported_but_never_gates() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = ExperimentConfig { filter: "haar".into(), alpha: Some(0.5), ..small_config(&out) };
    let status = rwl().arg("verify-admissible").arg("--config").arg(write_config(tmp.path(), &cfg)).status().unwrap();
    assert_eq!(status.code(), Some(0));
    let r = report(&out);
    let summary = &r["stages"][0]["summary"];
    assert_eq!(summary["holder"]["pass"], false);
    assert_eq!(summary["decay"]["pass"], true);
    assert!(out.join("admissibility.json").exists());
    assert!(out.join("manifest.json").exists());
}

#[test]
fn missing_or_invalid_config_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let status = rwl().arg("all").arg("--config").arg(tmp.path().join("absent.json")).status().unwrap();
    assert_eq!(status.code(), Some(2));

    let cfg = ExperimentConfig { filter: "haar".into(), ..small_config(&tmp.path().join("out")) };
    let status = rwl().arg("all").arg("--config").arg(write_config(tmp.path(), &cfg)).status().unwrap();
    assert_eq!(status.code(), Some(2));
    assert!(!tmp.path().join("out").exists(), "nothing may run before validation");

    fs::write(tmp.path().join("bad.json"), r#"{"schema": "rwl-experiment/1", "depht": 7}"#).unwrap();
    let status = rwl().arg("decompose").arg("--config").arg(tmp.path().join("bad.json")).status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn failed_checks_exit_with_one_and_io_errors_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    // two points cannot carry a fit
    let cfg = ExperimentConfig { ells: vec![0, 1], refine: false, ..small_config(&out) };
    let status = rwl().arg("scan-tell").arg("--config").arg(write_config(tmp.path(), &cfg)).status().unwrap();
    assert_eq!(status.code(), Some(1));
    assert_eq!(report(&out)["passed"], false);

    let blocker = tmp.path().join("file");
    fs::write(&blocker, b"x").unwrap();
    let status = rwl()
        .arg("identity-check")
        .arg("--config")
        .arg(write_config(tmp.path(), &small_config(&out)))
        .arg("--out")
        .arg(&blocker)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
}

#[test]
fn all_is_deterministic_across_worker_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), &small_config(&tmp.path().join("unused")));
    let mut manifests = Vec::new();
    for (name, workers) in [("a", "1"), ("b", "3")] {
        let out = tmp.path().join(name);
        let status = rwl()
            .args(["all", "--seed", "11", "--workers", workers, "--out"])
            .arg(&out)
            .arg("--config")
            .arg(&config)
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
        let m: Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
        manifests.push((out, m));
    }
    let (a, ma) = &manifests[0];
    let (b, mb) = &manifests[1];
    assert_eq!(ma["files"], mb["files"]);
    assert_eq!(ma["config_sha256"], mb["config_sha256"]);
    for f in ma["files"].as_array().unwrap() {
        let name = f["name"].as_str().unwrap();
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    assert_eq!(report(a)["config"]["seed"], 11);
}

#[test]
fn show_config_prints_defaults() {
    let out = rwl().arg("show-config").output().unwrap();
    assert!(out.status.success());
    let cfg: ExperimentConfig = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(cfg, ExperimentConfig::default());
}
