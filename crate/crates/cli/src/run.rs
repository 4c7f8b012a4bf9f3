//! Orchestration: validation, stage execution, report and manifest output.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::{ConfigError, ExperimentConfig};
use crate::stages::{run_stage, Check, Context, Stage, StageOutput};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{stage}: {source}")]
    Compute { stage: &'static str, source: rwl_core::Error },
    #[error("writing {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Compute { .. } | RunError::Io { .. } => 3,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageTiming {
    pub stage: &'static str,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub version: &'static str,
    pub config_sha256: String,
    pub workers: usize,
    pub stages: Vec<StageTiming>,
    pub wall_seconds: f64,
    pub files: Vec<FileEntry>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub outputs: Vec<StageOutput>,
    pub manifest: RunManifest,
    pub out_dir: PathBuf,
}

impl RunOutcome {
    pub fn failed_checks(&self) -> Vec<(&'static str, &Check)> {
        self.outputs
            .iter()
            .flat_map(|o| o.checks.iter().filter(|c| !c.pass).map(move |c| (o.stage.name(), c)))
            .collect()
    }

    /// 0 when every gating check passed, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.failed_checks().is_empty() {
            0
        } else {
            1
        }
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> Result<FileEntry, RunError> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|source| RunError::Io { path, source })?;
    Ok(FileEntry { name: name.into(), bytes: bytes.len(), sha256: sha256_hex(bytes) })
}

/// Validates `cfg`, runs `stages` in order on a pool of `workers` threads
/// (all cores when `None`) and writes the outputs to `cfg.out`.
pub fn run(stages: &[Stage], cfg: ExperimentConfig, workers: Option<usize>) -> Result<RunOutcome, RunError> {
    let res = cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w);
    }
    let pool = builder.build().map_err(|e| ConfigError(format!("worker pool: {e}")))?;
    let workers = pool.current_num_threads();
    // the output location is not part of the experiment
    let mut recorded: serde_json::Value = serde_json::from_str(&cfg.to_json()).expect("config is JSON");
    recorded.as_object_mut().expect("config is an object").remove("out");
    let config_json = serde_json::to_string_pretty(&recorded).expect("config serializes");
    let out_dir = cfg.out.clone();
    let ctx = Context::new(cfg, res);

    let start = Instant::now();
    let mut outputs = Vec::new();
    let mut timings = Vec::new();
    for &stage in stages {
        log::info!("{}: start", stage.name());
        let t = Instant::now();
        let output = pool
            .install(|| run_stage(&ctx, stage))
            .map_err(|source| RunError::Compute { stage: stage.name(), source })?;
        let secs = t.elapsed().as_secs_f64();
        for c in &output.checks {
            log::info!("{}: {} {} ({:e} vs {:e})", stage.name(), if c.pass { "pass" } else { "FAIL" }, c.name, c.value, c.bound);
        }
        log::info!("{}: done in {secs:.1} s", stage.name());
        timings.push(StageTiming { stage: stage.name(), wall_seconds: secs });
        outputs.push(output);
    }

    fs::create_dir_all(&out_dir).map_err(|source| RunError::Io { path: out_dir.clone(), source })?;
    let mut files = Vec::new();
    for o in &outputs {
        for (name, bytes) in &o.files {
            files.push(write(&out_dir, name, bytes)?);
        }
    }
    let failed: usize = outputs.iter().map(|o| o.checks.iter().filter(|c| !c.pass).count()).sum();
    let report = json!({
        "version": VERSION,
        "config": recorded,
        "stages": outputs.iter().map(|o| json!({
            "stage": o.stage,
            "passed": o.passed(),
            "checks": o.checks,
            "summary": o.summary,
        })).collect::<Vec<_>>(),
        "failed_checks": failed,
        "passed": failed == 0,
    });
    let report_bytes = serde_json::to_vec_pretty(&report).expect("report serializes");
    files.push(write(&out_dir, "report.json", &report_bytes)?);

    let manifest = RunManifest {
        version: VERSION,
        config_sha256: sha256_hex(config_json.as_bytes()),
        workers,
        stages: timings,
        wall_seconds: start.elapsed().as_secs_f64(),
        files,
    };
    let manifest_bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    write(&out_dir, "manifest.json", &manifest_bytes)?;
    Ok(RunOutcome { outputs, manifest, out_dir })
}
