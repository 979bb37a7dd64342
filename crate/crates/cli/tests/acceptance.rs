//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Runs every configuration under `configs/acceptance` against the registry
//! in `target/acceptance-runs` (override with `PLASMA2D_ACCEPTANCE_DIR`).
//! Shared ensembles found there are reused; every analysis is recomputed.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use plasma2d_cli::{run, ExperimentConfig, RunOptions, Status, Verdict};

struct Criterion {
    id: u32,
    title: &'static str,
    configs: &'static [&'static str],
    /// Keeps the verdicts that belong to this criterion.
    select: fn(&Verdict) -> bool,
}

fn all(_: &Verdict) -> bool {
    true
}

fn is_tail(v: &Verdict) -> bool {
    v.name.starts_with("no max above") || v.name.starts_with("every max above")
}

fn not_tail(v: &Verdict) -> bool {
    !is_tail(v)
}

const CRITERIA: &[Criterion] = &[
    Criterion { id: 1, title: "deterministic identity suite", configs: &["c1-identities"], select: all },
    Criterion { id: 2, title: "exact-moment oracle", configs: &["c2-oracle"], select: all },
    Criterion { id: 3, title: "sampler correctness", configs: &["c3-sampler"], select: all },
    Criterion { id: 4, title: "laplace-transform identity", configs: &["c4-laplace"], select: all },
    Criterion { id: 5, title: "clt for a radial bump", configs: &["c5-clt-beta1", "c5-clt-beta2", "c5-clt-beta4"], select: all },
    Criterion { id: 6, title: "mesoscopic variance growth", configs: &["c6-field"], select: all },
    Criterion { id: 7, title: "lln ladder", configs: &["c7-c8-ladder"], select: not_tail },
    Criterion { id: 8, title: "tail bound direction", configs: &["c7-c8-ladder"], select: is_tail },
    Criterion { id: 9, title: "gmc program", configs: &["c9-gmc"], select: all },
];

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn registry_root() -> PathBuf {
    std::env::var_os("PLASMA2D_ACCEPTANCE_DIR").map_or_else(|| workspace().join("target/acceptance-runs"), PathBuf::from)
}

/// Verdicts of one configuration, or the error that stopped it.
fn evaluate(name: &str, root: &Path) -> Result<Vec<Verdict>, String> {
    let path = workspace().join("configs/acceptance").join(format!("{name}.toml"));
    let mut config = ExperimentConfig::load(&path).map_err(|e| e.to_string())?;
    config.output_dir = Some(root.to_path_buf());
    let record = run(&config, RunOptions { force: true, replica_budget: None }).map_err(|e| format!("{name}: {e}"))?;
    if record.status != Status::Complete {
        return Err(format!("{name}: run {} incomplete", record.run_id));
    }
    Ok(record.verdicts)
}

fn main() -> ExitCode {
    let root = registry_root();
    println!("acceptance registry: {}", root.display());
    let mut cache: Vec<(&str, Result<Vec<Verdict>, String>)> = Vec::new();
    let mut lines = Vec::new();
    let mut failed = 0;
    for c in CRITERIA {
        let start = Instant::now();
        let mut verdicts = Vec::new();
        let mut errors = Vec::new();
        for &name in c.configs {
            if !cache.iter().any(|(n, _)| *n == name) {
                cache.push((name, evaluate(name, &root)));
            }
            match &cache.iter().find(|(n, _)| *n == name).expect("cached").1 {
                Ok(vs) => verdicts.extend(vs.iter().filter(|v| (c.select)(v)).cloned()),
                Err(e) => errors.push(e.clone()),
            }
        }
        let pass = errors.is_empty() && !verdicts.is_empty() && verdicts.iter().all(|v| v.pass);
        if !pass {
            failed += 1;
        }
        for v in &verdicts {
            println!("    [{}] {}: {}", if v.pass { "pass" } else { "fail" }, v.name, v.detail);
        }
        for e in &errors {
            println!("    [error] {e}");
        }
        let line = format!("criterion {} {}: {} ({:.1} s)", c.id, if pass { "PASS" } else { "FAIL" }, c.title, start.elapsed().as_secs_f64());
        println!("{line}");
        lines.push(line);
    }
    println!();
    for l in &lines {
        println!("{l}");
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} of {} criteria failed", CRITERIA.len());
        ExitCode::FAILURE
    }
}
