//! Run identity and append-only run directories.
//!
//! A run lives in `<out>/<run_id>/`, where `run_id` hashes the configuration
//! (minus thread count and output location), the command and the code
//! version. Work happens in a staging directory that is renamed into place
//! when the command finishes, so a completed run directory is never touched
//! again; re-running an identical configuration reuses it.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const RECORD_FILE: &str = "run.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Passed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub command: String,
    pub suite_name: String,
    pub code_version: String,
    pub started: String,
    pub finished: String,
    pub status: RunStatus,
    /// Paths relative to the run directory.
    pub artifacts: Vec<String>,
}

pub(crate) fn io_err(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> Error {
    let context = context.into();
    move |source| Error::Io { context, source }
}

/// Deterministic identifier of `(config, command, code version)`.
pub fn run_id(config: &ExperimentConfig, command: &str) -> String {
    let mut canonical = config.clone();
    canonical.threads = None;
    canonical.outputs.directory.clear();
    let mut hasher = Sha256::new();
    hasher.update(canonical.to_toml().as_bytes());
    hasher.update(b"\0");
    hasher.update(command.as_bytes());
    hasher.update(b"\0");
    hasher.update(CODE_VERSION.as_bytes());
    hasher.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Result of [`begin`].
pub enum RunStart {
    /// A completed run with this id already exists.
    Existing(PathBuf, RunRecord),
    Fresh(Staging),
}

/// A run being written.
pub struct Staging {
    pub run_id: String,
    pub command: String,
    pub suite_name: String,
    pub started: String,
    /// Write artifacts here.
    pub dir: PathBuf,
    final_dir: PathBuf,
}

pub fn begin(out_root: &Path, config: &ExperimentConfig, command: &str) -> Result<RunStart> {
    let id = run_id(config, command);
    let final_dir = out_root.join(&id);
    let record_path = final_dir.join(RECORD_FILE);
    if record_path.exists() {
        let text = fs::read_to_string(&record_path).map_err(io_err(format!("reading {}", record_path.display())))?;
        let record: RunRecord =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("corrupt run record {}: {e}", record_path.display())))?;
        return Ok(RunStart::Existing(final_dir, record));
    }
    fs::create_dir_all(out_root).map_err(io_err(format!("creating {}", out_root.display())))?;
    let dir = out_root.join(format!(".{id}.staging-{}", std::process::id()));
    if dir.exists() {
        fs::remove_dir_all(&dir).map_err(io_err(format!("clearing {}", dir.display())))?;
    }
    fs::create_dir(&dir).map_err(io_err(format!("creating {}", dir.display())))?;
    Ok(RunStart::Fresh(Staging {
        run_id: id,
        command: command.into(),
        suite_name: config.suite_name.clone(),
        started: now(),
        dir,
        final_dir,
    }))
}

impl Staging {
    /// Write `run.json` and move the run into place.
    pub fn finish(self, status: RunStatus, mut artifacts: Vec<String>) -> Result<(PathBuf, RunRecord)> {
        artifacts.sort();
        let record = RunRecord {
            run_id: self.run_id,
            command: self.command,
            suite_name: self.suite_name,
            code_version: CODE_VERSION.into(),
            started: self.started,
            finished: now(),
            status,
            artifacts,
        };
        let json = serde_json::to_string_pretty(&record).expect("run record serialises");
        let path = self.dir.join(RECORD_FILE);
        fs::write(&path, json + "\n").map_err(io_err(format!("writing {}", path.display())))?;
        if self.final_dir.exists() {
            // Another process completed the same run first; keep its copy.
            fs::remove_dir_all(&self.dir).map_err(io_err(format!("removing {}", self.dir.display())))?;
            let text = fs::read_to_string(self.final_dir.join(RECORD_FILE)).map_err(io_err("reading concurrent run record"))?;
            let existing = serde_json::from_str(&text).map_err(|e| Error::Config(format!("corrupt run record: {e}")))?;
            return Ok((self.final_dir, existing));
        }
        fs::rename(&self.dir, &self.final_dir).map_err(io_err(format!("moving run into {}", self.final_dir.display())))?;
        Ok((self.final_dir, record))
    }

    /// Remove the staging directory after a failure.
    pub fn abandon(self) {
        let _ = fs::remove_dir_all(&self.dir);
    }
}
