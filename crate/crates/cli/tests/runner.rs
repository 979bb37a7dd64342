use std::fs;
use std::path::Path;
use std::process::Command;

use plasma2d_cli::registry::{orphan_scan, run_dir};
use plasma2d_cli::{export, resume, run, ExperimentConfig, ExportFormat, RunOptions, RunnerError, Status};

fn clt_config(root: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::from_toml(
        r#"
kind = "clt"
seed = 7
replicas = 12

[model]
n = 16
beta = 2.0
ensemble = "pure-quadratic"

[sample]
method = "ginibre"

[clt]
bump_radius = 0.5
"#,
    )
    .unwrap();
    c.output_dir = Some(root.to_path_buf());
    c
}

fn outputs(root: &Path, id: &str, names: &[String]) -> Vec<Vec<u8>> {
    names.iter().map(|n| fs::read(run_dir(root, id).join(n)).unwrap()).collect()
}

#[test]
fn rerun_returns_the_stored_record() {
    let dir = tempfile::tempdir().unwrap();
    let config = clt_config(dir.path());
    let first = run(&config, RunOptions::default()).unwrap();
    assert_eq!(first.status, Status::Complete);
    let second = run(&config, RunOptions::default()).unwrap();
    assert_eq!(first, second);
}

#[test]
fn forced_rerun_is_bitwise_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = clt_config(dir.path());
    let a = run(&config, RunOptions::default()).unwrap();
    let before = outputs(dir.path(), &a.run_id, &a.outputs);
    let b = run(&config, RunOptions { force: true, ..Default::default() }).unwrap();
    assert_eq!(a.outputs, b.outputs);
    assert_eq!(before, outputs(dir.path(), &b.run_id, &b.outputs));
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    let per_pool = |threads: usize| {
        let dir = tempfile::tempdir().unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let rec = pool.install(|| run(&clt_config(dir.path()), RunOptions::default()).unwrap());
        outputs(dir.path(), &rec.run_id, &rec.outputs)
    };
    assert_eq!(per_pool(1), per_pool(3));
}

#[test]
fn resumed_run_matches_an_uninterrupted_one() {
    let whole = tempfile::tempdir().unwrap();
    let full = run(&clt_config(whole.path()), RunOptions::default()).unwrap();

    let cut = tempfile::tempdir().unwrap();
    let partial = run(&clt_config(cut.path()), RunOptions { replica_budget: Some(5), ..Default::default() }).unwrap();
    assert_eq!(partial.status, Status::Incomplete);
    let again = resume(cut.path(), &partial.run_id, RunOptions { replica_budget: Some(4), ..Default::default() }).unwrap();
    assert_eq!(again.status, Status::Incomplete);
    let done = resume(cut.path(), &partial.run_id, RunOptions::default()).unwrap();
    assert_eq!(done.status, Status::Complete);
    assert_eq!(done.run_id, full.run_id);
    assert_eq!(done.verdicts, full.verdicts);
    assert_eq!(outputs(cut.path(), &done.run_id, &done.outputs), outputs(whole.path(), &full.run_id, &full.outputs));
}

#[test]
fn unwritable_output_directory_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, b"x").unwrap();
    let err = run(&clt_config(&blocker.join("runs")), RunOptions::default()).unwrap_err();
    assert!(matches!(err, RunnerError::ConfigInvalid(_)), "{err}");
}

#[test]
fn unknown_run_ids_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let err = resume(dir.path(), "0000000000000000", RunOptions::default()).unwrap_err();
    assert!(matches!(err, RunnerError::UnknownRun(_)), "{err}");
    let err = export(dir.path(), "0000000000000000", ExportFormat::Csv, &dir.path().join("out")).unwrap_err();
    assert!(matches!(err, RunnerError::UnknownRun(_)), "{err}");
}

#[test]
fn missing_output_is_a_corrupt_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let config = clt_config(dir.path());
    let rec = run(&config, RunOptions::default()).unwrap();
    fs::remove_file(run_dir(dir.path(), &rec.run_id).join(&rec.outputs[0])).unwrap();
    let err = run(&config, RunOptions::default()).unwrap_err();
    assert!(matches!(err, RunnerError::Core(plasma2d_core::Error::CorruptCheckpoint(_))), "{err}");
    // a forced run repairs it
    run(&config, RunOptions { force: true, ..Default::default() }).unwrap();
}

#[test]
fn orphan_scan_flags_unlisted_files() {
    let dir = tempfile::tempdir().unwrap();
    let rec = run(&clt_config(dir.path()), RunOptions::default()).unwrap();
    assert!(orphan_scan(dir.path()).unwrap().is_empty());
    let stray = run_dir(dir.path(), &rec.run_id).join("stray.csv");
    fs::write(&stray, b"a\n1\n").unwrap();
    assert_eq!(orphan_scan(dir.path()).unwrap(), vec![stray]);
}

#[test]
fn exports_follow_the_table_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let rec = run(&clt_config(dir.path()), RunOptions::default()).unwrap();
    let csv_dir = dir.path().join("csv");
    let written = export(dir.path(), &rec.run_id, ExportFormat::Csv, &csv_dir).unwrap();
    assert_eq!(written.len(), rec.outputs.len());
    let long = fs::read_to_string(csv_dir.join("long.csv")).unwrap();
    let header = long.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "N,replica,statistic,value");

    let json_dir = dir.path().join("jsonl");
    export(dir.path(), &rec.run_id, ExportFormat::Jsonl, &json_dir).unwrap();
    let lines: Vec<serde_json::Value> = fs::read_to_string(json_dir.join("long.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), long.lines().filter(|l| !l.starts_with('#')).count() - 1);
    assert!(!lines.is_empty());
    for l in &lines {
        let keys: Vec<&str> = l.as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(keys.len(), 4);
        assert!(["N", "replica", "statistic", "value"].iter().all(|k| keys.contains(k)));
        assert!(l["value"].is_number());
    }
    let record: serde_json::Value = serde_json::from_str(fs::read_to_string(json_dir.join("record.jsonl")).unwrap().trim()).unwrap();
    assert_eq!(record["run_id"], rec.run_id.as_str());
    // exporting never touches the registry
    assert!(orphan_scan(dir.path()).unwrap().is_empty());
}

#[test]
fn run_id_survives_toml_round_trip() {
    let config = clt_config(Path::new("/nonexistent"));
    let back = ExperimentConfig::from_toml(&config.to_toml()).unwrap();
    assert_eq!(back.run_id(), config.run_id());
    let mut other = config.clone();
    other.output_dir = None;
    assert_eq!(other.run_id(), config.run_id());
    other.seed += 1;
    assert_ne!(other.run_id(), config.run_id());
}

#[test]
fn binary_reports_verdicts_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_plasma2d");
    let out = Command::new(bin).args(["verify", "--output-dir"]).arg(dir.path()).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{text}{}", String::from_utf8_lossy(&out.stderr));
    assert!(text.contains("[PASS] splitting constant"), "{text}");

    let out = Command::new(bin).args(["resume", "ffffffffffffffff", "--output-dir"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = Command::new(bin).args(["clt", "--n", "16", "--output-dir"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}
