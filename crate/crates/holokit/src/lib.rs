//! Configuration-driven experiments over `holokit-core`.
//!
//! `holokit run <config.json>` validates a schema-"1" config, runs one of
//! six experiments and writes CSV/JSON artifacts plus `manifest.json`.

pub mod config;
pub mod error;
pub mod experiments;

use config::{ExperimentKind, RunConfig};
use error::RunError;
use experiments::Artifact;
use serde_json::json;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "HOLOKIT_OUT";
pub const DEFAULT_OUT: &str = "out";

/// Command-line overrides of a config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub steps: Option<usize>,
    pub seed: Option<u64>,
}

/// Outcome of a successful run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub wall_time: f64,
}

pub fn load_config(path: &Path) -> Result<RunConfig, RunError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| RunError::Schema(format!("cannot read {}: {e}", path.display())))?;
    RunConfig::from_json(&text)
}

fn resolve_out(run: &RunConfig, ov: &Overrides) -> PathBuf {
    if let Some(p) = &ov.out {
        return p.clone();
    }
    if let Some(p) = &run.output {
        return PathBuf::from(p);
    }
    match std::env::var(OUT_ENV) {
        Ok(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from(DEFAULT_OUT),
    }
}

/// Validates, runs and computes all artifacts without writing anything.
pub fn compute(run: &RunConfig) -> Result<(Vec<Artifact>, f64), RunError> {
    let prepared = experiments::prepare(run)?;
    let start = Instant::now();
    let artifacts = experiments::execute(&prepared)?;
    Ok((artifacts, start.elapsed().as_secs_f64()))
}

/// Full `run` command: overrides, computation, then output files.
pub fn run(mut run: RunConfig, ov: &Overrides) -> Result<RunOutcome, RunError> {
    if let Some(s) = ov.steps {
        run.resolution.steps = s;
    }
    if let Some(s) = ov.seed {
        run.seed = s;
    }
    let (artifacts, wall_time) = compute(&run)?;
    let out_dir = resolve_out(&run, ov);
    std::fs::create_dir_all(&out_dir)?;
    let mut files = Vec::new();
    for a in &artifacts {
        let path = out_dir.join(&a.name);
        std::fs::write(&path, &a.bytes)?;
        files.push(path);
    }
    let finished = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let manifest = json!({
        "artifact_version": env!("CARGO_PKG_VERSION"),
        "schema": config::SCHEMA_VERSION,
        "experiment": run.experiment.name(),
        "seed": run.seed,
        "resolution": run.resolution,
        "wall_time_s": wall_time,
        "finished_unix": finished,
        "outputs": artifacts.iter().map(|a| a.name.clone()).collect::<Vec<_>>(),
        "config": run,
    });
    let path = out_dir.join("manifest.json");
    let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(|e| RunError::Io(e.to_string()))?;
    bytes.push(b'\n');
    std::fs::write(&path, bytes)?;
    files.push(path);
    Ok(RunOutcome { out_dir, files, wall_time })
}

/// Text of `list`: one experiment per line.
pub fn list_text() -> String {
    ExperimentKind::ALL.iter().map(|k| format!("{:<15} {}\n", k.name(), k.summary())).collect()
}

/// Text of `list --schema NAME`; NAME may also be "config".
pub fn schema_text(name: &str) -> Result<String, RunError> {
    let v = config::schema_for(name).ok_or_else(|| RunError::Schema(format!("unknown experiment {name:?}")))?;
    serde_json::to_string_pretty(&v).map(|s| s + "\n").map_err(|e| RunError::Io(e.to_string()))
}
