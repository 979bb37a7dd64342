//! Shared, resumable on-disk ensembles of plasma configurations.
//!
//! An ensemble is identified by its generation recipe (not by its size):
//! replica `i` depends only on the recipe and `i`, so any number of runs can
//! extend or reuse the same ensemble and interrupted generation resumes at
//! the first missing replica.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use plasma2d_core::model::Ensemble;
use plasma2d_core::rng::child_seed;
use plasma2d_core::sampler::{ginibre_sample, Chain, ChainSpec, Checkpoint, StepScale};
use plasma2d_core::{Configuration, Error as CoreError, ModelParams};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RunnerError};
use crate::hashing::short_hash;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Eigenvalues of a complex Ginibre matrix (β = 2 only).
    Ginibre,
    /// One independent Metropolis chain per replica.
    Mcmc,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSettings {
    pub sweeps: u64,
    pub burn_in: u64,
    pub thinning: u64,
    /// Fixed proposal scale; adapted during burn-in when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_scale: Option<f64>,
}

/// Generation recipe of an ensemble.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub n: usize,
    pub beta: f64,
    pub ensemble: Ensemble,
    pub method: Method,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<ChainSettings>,
}

impl EnsembleSpec {
    pub fn ginibre(n: usize, seed: u64) -> Self {
        EnsembleSpec { n, beta: 2.0, ensemble: Ensemble::PureQuadratic, method: Method::Ginibre, seed, chain: None }
    }

    pub fn mcmc(params: ModelParams, seed: u64, chain: ChainSettings) -> Self {
        EnsembleSpec {
            n: params.n,
            beta: params.beta,
            ensemble: params.ensemble,
            method: Method::Mcmc,
            seed,
            chain: Some(chain),
        }
    }

    pub fn validate(&self) -> Result<()> {
        ModelParams::new(self.n, self.beta, self.ensemble)?;
        match self.method {
            Method::Ginibre => {
                if self.beta != 2.0 {
                    return Err(RunnerError::ConfigInvalid("ginibre sampling requires beta = 2".into()));
                }
                if self.chain.is_some() {
                    return Err(RunnerError::ConfigInvalid("ginibre sampling takes no chain settings".into()));
                }
            }
            Method::Mcmc => {
                let c = self.chain.ok_or_else(|| RunnerError::ConfigInvalid("mcmc sampling needs chain settings".into()))?;
                self.chain_spec(0, &c).validate()?;
            }
        }
        Ok(())
    }

    fn chain_spec(&self, seed: u64, c: &ChainSettings) -> ChainSpec {
        ChainSpec {
            n_steps: c.sweeps,
            step_scale: c.step_scale.map_or(StepScale::Auto, StepScale::Fixed),
            burn_in: c.burn_in,
            thinning: c.thinning,
            seed,
        }
    }

    /// Configurations stored per replica.
    pub fn per_replica(&self) -> usize {
        match (self.method, &self.chain) {
            (Method::Mcmc, Some(c)) => ((c.sweeps - c.burn_in) / c.thinning) as usize,
            _ => 1,
        }
    }

    pub fn key(&self) -> String {
        short_hash(&serde_json::to_string(self).expect("spec serializes"))
    }

    fn label(&self) -> String {
        match self.method {
            Method::Ginibre => "ginibre".to_string(),
            Method::Mcmc => self.ensemble.to_string(),
        }
    }
}

/// Per-replica line of the ensemble index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicaEntry {
    pub index: usize,
    pub seed: u64,
    pub files: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acceptance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ess_energy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_scale: Option<f64>,
}

pub struct EnsembleStore {
    pub spec: EnsembleSpec,
    dir: PathBuf,
}

impl EnsembleStore {
    pub fn open(root: &Path, spec: EnsembleSpec) -> Result<Self> {
        spec.validate()?;
        let dir = root.join("ensembles").join(spec.key());
        fs::create_dir_all(dir.join("replicas")).map_err(|e| RunnerError::io(&dir, e))?;
        let spec_path = dir.join("spec.json");
        if !spec_path.exists() {
            let text = serde_json::to_string_pretty(&spec).expect("spec serializes");
            fs::write(&spec_path, text).map_err(|e| RunnerError::io(&spec_path, e))?;
        }
        Ok(EnsembleStore { spec, dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn index_path(&self) -> PathBuf {
        self.dir.join("index.jsonl")
    }

    /// Completed replicas by index. Fails if a listed file is missing.
    pub fn entries(&self) -> Result<BTreeMap<usize, ReplicaEntry>> {
        let path = self.index_path();
        let mut out = BTreeMap::new();
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(out),
            Err(e) => return Err(RunnerError::io(&path, e)),
        };
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let entry: ReplicaEntry = match serde_json::from_str(line) {
                Ok(e) => e,
                // a torn final line from an interrupted append
                Err(_) if !text.ends_with('\n') && text.lines().last() == Some(line) => continue,
                Err(e) => return Err(CoreError::CorruptCheckpoint(format!("{}: {e}", path.display())).into()),
            };
            for f in &entry.files {
                if !self.dir.join(f).exists() {
                    return Err(CoreError::CorruptCheckpoint(format!("index references missing file {f}")).into());
                }
            }
            out.insert(entry.index, entry);
        }
        Ok(out)
    }

    /// Generates replicas 0..count that are not yet stored, in index order.
    /// With a budget, stops after generating that many (for simulated
    /// interruption). Returns the number of completed replicas in 0..count.
    pub fn ensure(&self, count: usize, budget: Option<usize>) -> Result<usize> {
        self.drop_torn_tail()?;
        let done = self.entries()?;
        let missing: Vec<usize> = (0..count).filter(|i| !done.contains_key(i)).collect();
        let todo = &missing[..budget.map_or(missing.len(), |b| b.min(missing.len()))];
        let chunk = rayon::current_num_threads().max(1);
        for block in todo.chunks(chunk) {
            let results: Vec<Result<ReplicaEntry>> = block.par_iter().map(|&i| self.generate(i)).collect();
            for r in results {
                self.append(&r?)?;
            }
        }
        Ok(done.keys().filter(|&&i| i < count).count() + todo.len())
    }

    fn drop_torn_tail(&self) -> Result<()> {
        let path = self.index_path();
        let Ok(text) = fs::read_to_string(&path) else {
            return Ok(());
        };
        if !text.is_empty() && !text.ends_with('\n') {
            let keep = text.rfind('\n').map_or(0, |i| i + 1);
            fs::write(&path, &text[..keep]).map_err(|e| RunnerError::io(&path, e))?;
        }
        Ok(())
    }

    fn append(&self, entry: &ReplicaEntry) -> Result<()> {
        let path = self.index_path();
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| RunnerError::io(&path, e))?;
        let line = serde_json::to_string(entry).expect("entry serializes");
        writeln!(f, "{line}").map_err(|e| RunnerError::io(&path, e))?;
        f.sync_data().map_err(|e| RunnerError::io(&path, e))?;
        Ok(())
    }

    fn generate(&self, index: usize) -> Result<ReplicaEntry> {
        let seed = child_seed(self.spec.seed, index as u64);
        let label = self.spec.label();
        let mut entry = ReplicaEntry {
            index,
            seed,
            files: Vec::new(),
            acceptance: None,
            ess_energy: None,
            step_scale: None,
        };
        match self.spec.method {
            Method::Ginibre => {
                let config = ginibre_sample(self.spec.n, seed)?;
                let name = format!("replicas/r{index:06}.csv");
                let cp = Checkpoint { n: self.spec.n, beta: self.spec.beta, ensemble: label, sweep: 0, seed, config };
                cp.write(&self.dir.join(&name))?;
                entry.files.push(name);
            }
            Method::Mcmc => {
                let c = self.spec.chain.expect("validated");
                let params = ModelParams::new(self.spec.n, self.spec.beta, self.spec.ensemble)?;
                let mut saved: Vec<Result<String>> = Vec::new();
                let diag = Chain::new(params, self.spec.chain_spec(seed, &c))?.run(|k, sweep, config| {
                    let name = format!("replicas/r{index:06}-{k:05}.csv");
                    let cp = Checkpoint {
                        n: self.spec.n,
                        beta: self.spec.beta,
                        ensemble: label.clone(),
                        sweep,
                        seed,
                        config: config.clone(),
                    };
                    saved.push(cp.write(&self.dir.join(&name)).map(|_| name).map_err(Into::into));
                })?;
                for s in saved {
                    entry.files.push(s?);
                }
                entry.acceptance = Some(diag.acceptance_rate);
                entry.ess_energy = Some(diag.ess_energy);
                entry.step_scale = Some(diag.step_scale);
            }
        }
        Ok(entry)
    }

    /// Configurations of replicas 0..count, in index order, generating any
    /// that are missing.
    pub fn load(&self, count: usize) -> Result<Vec<Vec<Configuration>>> {
        self.ensure(count, None)?;
        let entries = self.entries()?;
        (0..count)
            .map(|i| {
                let e = &entries[&i];
                e.files
                    .iter()
                    .map(|f| Ok(Checkpoint::read(&self.dir.join(f))?.config))
                    .collect::<Result<Vec<_>>>()
            })
            .collect()
    }

    /// All configurations of replicas 0..count, flattened in index order.
    pub fn load_flat(&self, count: usize) -> Result<Vec<Configuration>> {
        Ok(self.load(count)?.into_iter().flatten().collect())
    }
}
