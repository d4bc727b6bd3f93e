//! Configuration-driven runner for qndsim experiments.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod presets;

use std::path::Path;

use anyhow::{Context, Result};

pub use config::{parse_config, parse_config_file, serialize_config, RunSettings};
pub use manifest::{Command, FilterInputs, RunManifest, RunPlan};
pub use presets::{preset, Preset, PRESET_NAMES};

/// Environment variable holding the number of worker threads.
pub const WORKERS_ENV: &str = "QNDSIM_WORKERS";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Worker count from the environment, if set.
pub fn workers_from_env() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .with_context(|| format!("{WORKERS_ENV}=`{v}` is not a count"))?;
            anyhow::ensure!(n > 0, "{WORKERS_ENV} must be at least 1");
            Ok(Some(n))
        }
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Runs `plan` on a pool of `workers` threads (rayon's default when
/// `None`) and writes the manifest next to the outputs.
pub fn run(plan: &RunPlan, out: &Path, workers: Option<usize>) -> Result<RunManifest> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    let pool = builder.build()?;
    let outputs = pool.install(|| commands::execute(plan, out))?;
    let manifest = RunManifest {
        plan: plan.clone(),
        output_dir: out.to_path_buf(),
        created_at: chrono::Utc::now(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        outputs,
    };
    qndsim_core::io::write_json(&out.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// Re-runs the plan stored in a manifest into `out`.
pub fn replay(manifest: &Path, out: &Path, workers: Option<usize>) -> Result<RunManifest> {
    let m: RunManifest = qndsim_core::io::read_json(manifest)
        .with_context(|| format!("reading manifest {}", manifest.display()))?;
    run(&m.plan, out, workers)
}
