//! Run records and the append-only run journal.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Kind};
use crate::error::{Result, RunnerError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(name: &str, pass: bool, detail: impl Into<String>) -> Self {
        Verdict { name: name.to_string(), pass, detail: detail.into() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Complete,
    Incomplete,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub kind: Kind,
    pub code_version: String,
    pub config: ExperimentConfig,
    pub status: Status,
    pub started_unix: f64,
    pub finished_unix: Option<f64>,
    /// Master seed and the derived per-replica seeds.
    pub master_seed: u64,
    pub child_seeds: Vec<u64>,
    /// Keys of the shared ensembles this run read.
    pub ensembles: Vec<String>,
    /// Output files, relative to the run directory.
    pub outputs: Vec<String>,
    pub verdicts: Vec<Verdict>,
    pub summary: serde_json::Value,
}

impl RunRecord {
    pub fn all_pass(&self) -> bool {
        self.status == Status::Complete && self.verdicts.iter().all(|v| v.pass)
    }
}

pub fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

pub fn run_dir(root: &Path, run_id: &str) -> PathBuf {
    root.join("runs").join(run_id)
}

pub fn record_path(root: &Path, run_id: &str) -> PathBuf {
    run_dir(root, run_id).join("record.json")
}

#[derive(Serialize, Deserialize)]
struct JournalLine<'a> {
    run_id: &'a str,
    kind: &'a str,
    event: &'a str,
    unix: f64,
}

/// Appends one event to `registry.jsonl`.
pub fn journal(root: &Path, run_id: &str, kind: Kind, event: &str) -> Result<()> {
    let path = root.join("registry.jsonl");
    let mut f = OpenOptions::new().create(true).append(true).open(&path).map_err(|e| RunnerError::io(&path, e))?;
    let line = serde_json::to_string(&JournalLine { run_id, kind: kind.name(), event, unix: unix_now() })
        .expect("journal line serializes");
    writeln!(f, "{line}").map_err(|e| RunnerError::io(&path, e))
}

pub fn load_record(root: &Path, run_id: &str) -> Result<RunRecord> {
    let path = record_path(root, run_id);
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(RunnerError::UnknownRun(run_id.to_string())),
        Err(e) => return Err(RunnerError::io(&path, e)),
    };
    serde_json::from_str(&text)
        .map_err(|e| plasma2d_core::Error::CorruptCheckpoint(format!("{}: {e}", path.display())).into())
}

pub fn save_record(root: &Path, record: &RunRecord) -> Result<()> {
    let path = record_path(root, &record.run_id);
    let tmp = path.with_extension("json.tmp");
    let text = serde_json::to_string_pretty(record).expect("record serializes");
    fs::write(&tmp, text).map_err(|e| RunnerError::io(&tmp, e))?;
    fs::rename(&tmp, &path).map_err(|e| RunnerError::io(&path, e))
}

/// Files under `runs/` not listed in their run's manifest. Bookkeeping
/// files (record, config snapshot) are exempt.
pub fn orphan_scan(root: &Path) -> Result<Vec<PathBuf>> {
    let mut orphans = Vec::new();
    let runs = root.join("runs");
    let Ok(dirs) = fs::read_dir(&runs) else {
        return Ok(orphans);
    };
    for d in dirs.flatten() {
        let dir = d.path();
        if !dir.is_dir() {
            orphans.push(dir);
            continue;
        }
        let id = d.file_name().to_string_lossy().to_string();
        let listed = match load_record(root, &id) {
            Ok(r) => r.outputs,
            Err(_) => Vec::new(),
        };
        for f in fs::read_dir(&dir).map_err(|e| RunnerError::io(&dir, e))?.flatten() {
            let name = f.file_name().to_string_lossy().to_string();
            if name == "record.json" || name == "config.toml" {
                continue;
            }
            if !listed.contains(&name) {
                orphans.push(f.path());
            }
        }
    }
    Ok(orphans)
}
