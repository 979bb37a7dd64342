//! Run, resume and export experiments against an on-disk registry.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Result, RunnerError};
use crate::experiments::{self, Context, Table};
use crate::hashing::CODE_VERSION;
use crate::registry::{self, RunRecord, Status};

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Re-run even if a completed record exists.
    pub force: bool,
    /// Generate at most this many replicas, leaving the run incomplete.
    pub replica_budget: Option<usize>,
}

fn ensure_writable(root: &Path) -> Result<()> {
    let unwritable = |e: std::io::Error| RunnerError::ConfigInvalid(format!("output directory {} is not writable: {e}", root.display()));
    fs::create_dir_all(root.join("runs")).map_err(unwritable)?;
    let probe = root.join(format!(".probe-{}", std::process::id()));
    fs::write(&probe, b"").map_err(unwritable)?;
    let _ = fs::remove_file(&probe);
    Ok(())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!("{}.tmp", std::process::id()));
    fs::write(&tmp, bytes).map_err(|e| RunnerError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| RunnerError::io(path, e))
}

fn check_outputs(root: &Path, record: &RunRecord) -> Result<()> {
    let dir = registry::run_dir(root, &record.run_id);
    for f in &record.outputs {
        if !dir.join(f).exists() {
            return Err(plasma2d_core::Error::CorruptCheckpoint(format!("run {} lists missing output {f}", record.run_id)).into());
        }
    }
    Ok(())
}

/// Executes `config`, or returns the stored record if this exact
/// experiment already completed.
pub fn run(config: &ExperimentConfig, opts: RunOptions) -> Result<RunRecord> {
    experiments::validate(config)?;
    let root = config.output_root();
    ensure_writable(&root)?;
    let id = config.run_id();
    let dir = registry::run_dir(&root, &id);

    match registry::load_record(&root, &id) {
        Ok(rec) if rec.status == Status::Complete && !opts.force => {
            check_outputs(&root, &rec)?;
            return Ok(rec);
        }
        Ok(_) | Err(RunnerError::UnknownRun(_)) => {}
        // a corrupt record is replaced when forced
        Err(_) if opts.force => {}
        Err(e) => return Err(e),
    }
    if opts.force && dir.exists() {
        fs::remove_dir_all(&dir).map_err(|e| RunnerError::io(&dir, e))?;
    }
    fs::create_dir_all(&dir).map_err(|e| RunnerError::io(&dir, e))?;
    let mut snapshot = config.clone();
    snapshot.output_dir = None;
    write_atomic(&dir.join("config.toml"), snapshot.to_toml().as_bytes())?;

    let started = registry::unix_now();
    registry::journal(&root, &id, config.kind, "started")?;
    let ctx = Context::new(&root, config, opts.replica_budget);
    let outcome = match experiments::execute(&ctx) {
        Ok(o) => o,
        Err(e) => {
            registry::journal(&root, &id, config.kind, "failed")?;
            return Err(e);
        }
    };

    let mut names = Vec::new();
    for (name, bytes) in &outcome.outputs {
        write_atomic(&dir.join(name), bytes)?;
        names.push(name.clone());
    }
    let status = if outcome.complete { Status::Complete } else { Status::Incomplete };
    let record = RunRecord {
        run_id: id.clone(),
        kind: config.kind,
        code_version: CODE_VERSION.to_string(),
        config: snapshot,
        status,
        started_unix: started,
        finished_unix: outcome.complete.then(registry::unix_now),
        master_seed: config.seed,
        child_seeds: outcome.child_seeds,
        ensembles: outcome.ensembles,
        outputs: names,
        verdicts: outcome.verdicts,
        summary: outcome.summary,
    };
    registry::save_record(&root, &record)?;
    let event = match status {
        Status::Complete => "complete",
        Status::Incomplete => "incomplete",
    };
    registry::journal(&root, &id, config.kind, event)?;
    Ok(record)
}

/// Continues an interrupted run from its stored configuration. A completed
/// run is returned unchanged.
pub fn resume(root: &Path, run_id: &str, opts: RunOptions) -> Result<RunRecord> {
    let path = registry::run_dir(root, run_id).join("config.toml");
    if !path.exists() {
        // surfaces UnknownRun, or CorruptCheckpoint for a record without its config
        registry::load_record(root, run_id)?;
        return Err(plasma2d_core::Error::CorruptCheckpoint(format!("run {run_id} has no config snapshot")).into());
    }
    let mut config = ExperimentConfig::load(&path)?;
    config.output_dir = Some(root.to_path_buf());
    if config.run_id() != run_id {
        return Err(plasma2d_core::Error::CorruptCheckpoint(format!(
            "config snapshot of {run_id} hashes to {}",
            config.run_id()
        ))
        .into());
    }
    run(&config, RunOptions { force: false, ..opts })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExportFormat {
    Csv,
    Jsonl,
}

impl std::str::FromStr for ExportFormat {
    type Err = RunnerError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ExportFormat::Csv),
            "jsonl" => Ok(ExportFormat::Jsonl),
            _ => Err(RunnerError::ConfigInvalid(format!("unknown export format '{s}'"))),
        }
    }
}

/// Writes the tables of a completed run into `dest`. Never modifies the
/// registry.
pub fn export(root: &Path, run_id: &str, format: ExportFormat, dest: &Path) -> Result<Vec<PathBuf>> {
    let record = registry::load_record(root, run_id)?;
    if record.status != Status::Complete {
        return Err(RunnerError::ConfigInvalid(format!("run {run_id} is incomplete; resume it first")));
    }
    check_outputs(root, &record)?;
    fs::create_dir_all(dest).map_err(|e| RunnerError::io(dest, e))?;
    let dir = registry::run_dir(root, run_id);
    let mut written = Vec::new();
    for name in &record.outputs {
        let src = dir.join(name);
        let bytes = fs::read(&src).map_err(|e| RunnerError::io(&src, e))?;
        let is_csv = name.ends_with(".csv");
        let (target, contents) = match (format, is_csv) {
            (ExportFormat::Jsonl, true) => (dest.join(name.replace(".csv", ".jsonl")), csv_to_jsonl(&bytes)?),
            _ => (dest.join(name), bytes),
        };
        fs::write(&target, contents).map_err(|e| RunnerError::io(&target, e))?;
        written.push(target);
    }
    if format == ExportFormat::Jsonl {
        let target = dest.join("record.jsonl");
        let mut line = serde_json::to_vec(&record).expect("record serializes");
        line.push(b'\n');
        fs::write(&target, line).map_err(|e| RunnerError::io(&target, e))?;
        written.push(target);
    }
    Ok(written)
}

fn csv_to_jsonl(bytes: &[u8]) -> Result<Vec<u8>> {
    let table = Table::from_csv(bytes)?;
    let mut out = Vec::new();
    for row in &table.rows {
        let obj: serde_json::Map<String, serde_json::Value> = table
            .header
            .iter()
            .zip(row)
            .map(|(k, v)| {
                let val = v.parse::<f64>().ok().and_then(serde_json::Number::from_f64).map_or_else(
                    || serde_json::Value::String(v.clone()),
                    serde_json::Value::Number,
                );
                (k.clone(), val)
            })
            .collect();
        out.extend(serde_json::to_vec(&obj).expect("row serializes"));
        out.push(b'\n');
    }
    Ok(out)
}
