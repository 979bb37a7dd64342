//! One module per experiment kind. Each turns a validated configuration
//! into tables and verdicts; the runner owns persistence.

use std::cell::Cell;
use std::path::Path;

use plasma2d_core::model::Ensemble;
use plasma2d_core::rng::child_seed;
use plasma2d_core::sampler::kostlan_radii_sq;
use plasma2d_core::{Configuration, ModelParams};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Kind};
use crate::ensemble::{EnsembleSpec, EnsembleStore};
use crate::error::{Result, RunnerError};
use crate::registry::Verdict;

pub mod clt;
pub mod field;
pub mod gmc;
pub mod ladder;
pub mod laplace;
pub mod sample;
pub mod verify;

/// A CSV table held in memory until the run commits it.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push<I, T>(&mut self, row: I)
    where
        I: IntoIterator<Item = T>,
        T: ToString,
    {
        let row: Vec<String> = row.into_iter().map(|v| v.to_string()).collect();
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// RFC-4180 CSV, optionally preceded by `# key=value` comment lines.
    pub fn to_csv(&self, comments: &[String]) -> Vec<u8> {
        let mut out = Vec::new();
        for c in comments {
            out.extend_from_slice(format!("# {c}\n").as_bytes());
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }

    pub fn from_csv(bytes: &[u8]) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(bytes);
        let bad = |e: csv::Error| RunnerError::from(plasma2d_core::Error::CorruptCheckpoint(e.to_string()));
        let header = r.headers().map_err(bad)?.iter().map(String::from).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            rows.push(rec.map_err(bad)?.iter().map(String::from).collect());
        }
        Ok(Table { header, rows })
    }
}

/// Long-format rows: one per (N, replica, statistic).
#[derive(Clone, Debug, Default)]
pub struct LongTable(pub Table);

impl LongTable {
    pub fn new() -> Self {
        LongTable(Table::new(&["N", "replica", "statistic", "value"]))
    }

    pub fn push(&mut self, n: usize, replica: usize, statistic: &str, value: f64) {
        self.0.push([n.to_string(), replica.to_string(), statistic.to_string(), value.to_string()]);
    }
}

/// What an experiment hands back to the runner.
#[derive(Debug, Default)]
pub struct Outcome {
    /// False when a replica budget stopped generation early.
    pub complete: bool,
    pub child_seeds: Vec<u64>,
    pub ensembles: Vec<String>,
    /// (file name, contents) written into the run directory.
    pub outputs: Vec<(String, Vec<u8>)>,
    pub verdicts: Vec<Verdict>,
    pub summary: serde_json::Value,
}

impl Outcome {
    pub fn incomplete(ensembles: Vec<String>) -> Self {
        Outcome { complete: false, ensembles, ..Default::default() }
    }

    pub fn table(&mut self, name: &str, table: &Table, comments: &[String]) {
        self.outputs.push((name.to_string(), table.to_csv(comments)));
    }

    pub fn long(&mut self, long: &LongTable) {
        self.table("long.csv", &long.0, &[]);
    }

    pub fn jsonl<T: Serialize>(&mut self, name: &str, records: &[T]) {
        let mut out = Vec::new();
        for r in records {
            out.extend(serde_json::to_vec(r).expect("record serializes"));
            out.push(b'\n');
        }
        self.outputs.push((name.to_string(), out));
    }
}

/// Inputs shared by all experiments.
pub struct Context<'a> {
    pub root: &'a Path,
    pub config: &'a ExperimentConfig,
    /// Replicas this invocation may still generate; unlimited when `None`.
    pub budget: Cell<Option<usize>>,
}

impl<'a> Context<'a> {
    pub fn new(root: &'a Path, config: &'a ExperimentConfig, budget: Option<usize>) -> Self {
        Context { root, config, budget: Cell::new(budget) }
    }

    /// Replicas 0..count of a shared ensemble, or `None` when the budget ran
    /// out first.
    pub fn ensemble(&self, spec: EnsembleSpec, count: usize) -> Result<Option<Vec<Vec<Configuration>>>> {
        let store = EnsembleStore::open(self.root, spec)?;
        let before = store.entries()?.keys().filter(|&&i| i < count).count();
        let done = store.ensure(count, self.budget.get())?;
        if let Some(b) = self.budget.get() {
            self.budget.set(Some(b.saturating_sub(done - before)));
        }
        if done < count {
            return Ok(None);
        }
        Ok(Some(store.load(count)?))
    }


    /// Header comments recording provenance of exported tables.
    pub fn provenance(&self) -> Vec<String> {
        let c = self.config;
        let mut v = vec![format!("kind={}", c.kind.name()), format!("seed={}", c.seed), format!("replicas={}", c.replicas)];
        if let Some(m) = c.model {
            v.push(format!("N={}, beta={}, ensemble={}", m.n, m.beta, m.ensemble));
        }
        v.push(format!("code={}", crate::hashing::CODE_VERSION));
        v
    }
}

/// Where configurations come from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    /// The shared ensemble described by `[model]` and `[sample]`.
    #[default]
    Ensemble,
    /// Independent squared moduli Gamma(k, 1)/N (β = 2 Ginibre); radial
    /// statistics only.
    Kostlan,
}

impl Source {
    pub fn check(self, model: &ModelParams) -> Result<()> {
        if self == Source::Kostlan && (model.beta != 2.0 || model.ensemble != Ensemble::PureQuadratic) {
            return Err(RunnerError::ConfigInvalid("kostlan sampling requires beta = 2 and the pure-quadratic ensemble".into()));
        }
        Ok(())
    }
}

/// Particle moduli of Kostlan replicas 0..count under `seed`.
pub fn kostlan_moduli(n: usize, seed: u64, count: usize) -> Vec<Vec<f64>> {
    (0..count)
        .into_par_iter()
        .map(|i| kostlan_radii_sq(n, child_seed(seed, i as u64)).into_iter().map(f64::sqrt).collect())
        .collect()
}

/// Every `stride`-th configuration of each replica, flattened.
pub fn strided(replicas: Vec<Vec<Configuration>>, stride: usize) -> Vec<Configuration> {
    replicas.into_iter().flat_map(|r| r.into_iter().step_by(stride.max(1))).collect()
}

pub fn execute(ctx: &Context) -> Result<Outcome> {
    match ctx.config.kind {
        Kind::Sample => sample::run(ctx),
        Kind::Field => field::run(ctx),
        Kind::MaxLadder => ladder::run(ctx),
        Kind::Clt => clt::run(ctx),
        Kind::LaplaceProbe => laplace::run(ctx),
        Kind::Gmc => gmc::run(ctx),
        Kind::Verify => verify::run(ctx),
    }
}

/// Checks kind-specific preconditions without doing any work.
pub fn validate(config: &ExperimentConfig) -> Result<()> {
    match config.kind {
        Kind::Sample => sample::validate(config),
        Kind::Field => field::validate(config),
        Kind::MaxLadder => ladder::validate(config),
        Kind::Clt => clt::validate(config),
        Kind::LaplaceProbe => laplace::validate(config),
        Kind::Gmc => gmc::validate(config),
        Kind::Verify => verify::validate(config),
    }
}
