//! Experiment configuration files (TOML).

use std::path::{Path, PathBuf};

use plasma2d_core::ModelParams;
use serde::{Deserialize, Serialize};

use crate::ensemble::{ChainSettings, EnsembleSpec, Method};
use crate::error::{Result, RunnerError};
use crate::hashing::{short_hash, CODE_VERSION};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Sample,
    Field,
    MaxLadder,
    Clt,
    LaplaceProbe,
    Gmc,
    Verify,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Sample => "sample",
            Kind::Field => "field",
            Kind::MaxLadder => "max-ladder",
            Kind::Clt => "clt",
            Kind::LaplaceProbe => "laplace-probe",
            Kind::Gmc => "gmc",
            Kind::Verify => "verify",
        }
    }
}

/// How configurations are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSection {
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<ChainSettings>,
}

impl SampleSection {
    pub fn ensemble_spec(&self, model: &ModelParams, seed: u64) -> EnsembleSpec {
        match self.method {
            Method::Ginibre => EnsembleSpec { beta: model.beta, ..EnsembleSpec::ginibre(model.n, seed) },
            Method::Mcmc => EnsembleSpec {
                n: model.n,
                beta: model.beta,
                ensemble: model.ensemble,
                method: Method::Mcmc,
                seed,
                chain: self.chain,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub seed: u64,
    #[serde(default)]
    pub replicas: usize,
    /// Root of the registry; not part of the run identity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample: Option<SampleSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<crate::experiments::field::FieldSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ladder: Option<crate::experiments::ladder::LadderSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clt: Option<crate::experiments::clt::CltSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub laplace: Option<crate::experiments::laplace::LaplaceSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gmc: Option<crate::experiments::gmc::GmcSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<crate::experiments::verify::VerifySection>,
}

impl ExperimentConfig {
    /// A configuration with no sections; kinds fall back to their defaults.
    pub fn new(kind: Kind, seed: u64) -> Self {
        ExperimentConfig {
            kind,
            seed,
            replicas: 0,
            output_dir: None,
            model: None,
            sample: None,
            field: None,
            ladder: None,
            clt: None,
            laplace: None,
            gmc: None,
            verify: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| RunnerError::ConfigInvalid(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| RunnerError::ConfigInvalid(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Stable identity of the experiment: hash of the canonical JSON form
    /// (without the output directory) and the code version.
    pub fn run_id(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        let canonical = serde_json::to_value(&c).expect("config serializes");
        short_hash(&format!("{canonical}\n{CODE_VERSION}"))
    }

    pub fn output_root(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("plasma2d-runs"))
    }

    pub fn model(&self) -> Result<ModelParams> {
        let m = self.model.ok_or_else(|| RunnerError::ConfigInvalid(format!("{} needs a [model] section", self.kind.name())))?;
        m.validate().map_err(|e| RunnerError::ConfigInvalid(e.to_string()))?;
        Ok(m)
    }

    pub fn sample(&self) -> Result<SampleSection> {
        self.sample.ok_or_else(|| RunnerError::ConfigInvalid(format!("{} needs a [sample] section", self.kind.name())))
    }

    pub fn require_replicas(&self, min: usize) -> Result<usize> {
        if self.replicas < min {
            return Err(RunnerError::ConfigInvalid(format!(
                "{} needs replicas >= {min}, got {}",
                self.kind.name(),
                self.replicas
            )));
        }
        Ok(self.replicas)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
kind = "sample"
seed = 7
replicas = 10
output_dir = "somewhere"

[model]
n = 64
beta = 2.0
ensemble = "canonical-f"

[sample]
method = "ginibre"
"#;

    #[test]
    fn parses_and_round_trips() {
        let c = ExperimentConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(c.kind, Kind::Sample);
        let back = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.run_id(), c.run_id());
    }

    #[test]
    fn run_id_ignores_output_dir_only() {
        let a = ExperimentConfig::from_toml(SAMPLE).unwrap();
        let mut b = a.clone();
        b.output_dir = Some("elsewhere".into());
        assert_eq!(a.run_id(), b.run_id());
        b.seed = 8;
        assert_ne!(a.run_id(), b.run_id());
        assert_eq!(a.run_id().len(), 16);
    }

    #[test]
    fn unknown_fields_are_config_errors() {
        let bad = SAMPLE.replace("replicas = 10", "replicas = 10\nbogus = 1");
        assert!(matches!(ExperimentConfig::from_toml(&bad), Err(RunnerError::ConfigInvalid(_))));
    }
}
