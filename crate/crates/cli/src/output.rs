//! Writes run outputs and the accompanying JSON manifest.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::commands::RunResult;
use crate::error::CliError;
use crate::scenario::{hex, Scenario};

pub const OUT_DIR_ENV: &str = "PENNING_OUT_DIR";

#[derive(Serialize)]
struct FileEntry {
    file: String,
    sha256: String,
    bytes: usize,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    scenario_sha256: &'a str,
    seed: u64,
    version: &'a str,
    core_version: &'a str,
    created_unix_s: u64,
    outputs: Vec<FileEntry>,
}

/// Output directory: explicit flag, then the environment variable, then the
/// scenario's `[output] dir`, then `./penning-out`.
pub fn output_dir(flag: Option<&Path>, sc: &Scenario) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = std::env::var_os(OUT_DIR_ENV).filter(|p| !p.is_empty()) {
        return PathBuf::from(p);
    }
    sc.output_dir.clone().unwrap_or_else(|| PathBuf::from("penning-out"))
}

/// Writes every output plus `<command>.manifest.json`; returns the paths
/// written.
pub fn write_run(dir: &Path, sc: &Scenario, run: &RunResult) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut entries = Vec::new();
    for o in &run.outputs {
        let p = dir.join(&o.name);
        std::fs::write(&p, &o.bytes)?;
        entries.push(FileEntry {
            file: o.name.clone(),
            sha256: hex(&Sha256::digest(&o.bytes)),
            bytes: o.bytes.len(),
        });
        written.push(p);
    }
    let manifest = Manifest {
        command: run.command.name(),
        scenario_sha256: &sc.hash,
        seed: sc.seed,
        version: env!("CARGO_PKG_VERSION"),
        core_version: penning::VERSION,
        created_unix_s: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        outputs: entries,
    };
    let p = dir.join(format!("{}.manifest.json", run.command.name()));
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Numerical(e.to_string()))?;
    std::fs::write(&p, json + "\n")?;
    written.push(p);
    Ok(written)
}
