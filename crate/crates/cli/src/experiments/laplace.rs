//! `laplace-probe`: brute-force check of the exponential-moment identity for
//! φ_{z,ε} at small N.

use plasma2d_core::fluctuations::{laplace_identity_probe, TestFunction};
use plasma2d_core::potential::CenterSpec;
use plasma2d_core::rng::child_seed;
use plasma2d_core::Point;
use serde::{Deserialize, Serialize};

use super::{Context, Outcome, Table};
use crate::config::ExperimentConfig;
use crate::error::{Result, RunnerError};
use crate::registry::Verdict;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaplaceSection {
    /// Center z of φ_{z,ε}.
    #[serde(default)]
    pub z: (f64, f64),
    pub epsilon: f64,
    pub ts: Vec<f64>,
    pub samples: usize,
    /// Largest acceptable combined relative standard error.
    #[serde(default = "default_stderr_target")]
    pub stderr_target: f64,
}

fn default_stderr_target() -> f64 {
    0.02
}

fn section(config: &ExperimentConfig) -> Result<LaplaceSection> {
    config.laplace.clone().ok_or_else(|| RunnerError::ConfigInvalid("laplace-probe needs a [laplace] section".into()))
}

pub fn validate(config: &ExperimentConfig) -> Result<()> {
    let s = section(config)?;
    config.model()?;
    if s.ts.is_empty() || s.samples < 2 {
        return Err(RunnerError::ConfigInvalid("laplace-probe needs t values and samples >= 2".into()));
    }
    let z = Point::new(s.z.0, s.z.1);
    TestFunction::phi_ze(z, s.epsilon, CenterSpec::default())?;
    Ok(())
}

pub fn run(ctx: &Context) -> Result<Outcome> {
    let c = ctx.config;
    let s = section(c)?;
    let model = c.model()?;
    let phi = TestFunction::phi_ze(Point::new(s.z.0, s.z.1), s.epsilon, CenterSpec::default())?;
    let mut t = Table::new(&[
        "N", "beta", "t", "lhs", "lhs_stderr", "rhs", "rhs_stderr", "energy", "k_ratio", "discrepancy", "combined_rel_stderr",
        "laplacian_sup", "samples",
    ]);
    let mut out = Outcome { complete: true, ..Default::default() };
    let mut probes = Vec::new();
    for (i, &tv) in s.ts.iter().enumerate() {
        let seed = child_seed(c.seed, i as u64);
        out.child_seeds.push(seed);
        let p = laplace_identity_probe(model.n, &phi, tv, model.beta, s.samples, seed)?;
        let rel = p.lhs_stderr.hypot(p.rhs_stderr) / p.rhs;
        t.push([
            p.n.to_string(),
            p.beta.to_string(),
            p.t.to_string(),
            p.lhs.to_string(),
            p.lhs_stderr.to_string(),
            p.rhs.to_string(),
            p.rhs_stderr.to_string(),
            p.energy.to_string(),
            p.k_ratio.to_string(),
            p.discrepancy.to_string(),
            rel.to_string(),
            p.laplacian_sup.to_string(),
            p.samples.to_string(),
        ]);
        out.verdicts.push(Verdict::new(
            &format!("laplace identity t={tv}"),
            p.discrepancy <= 3.0,
            format!("lhs {:.6} ± {:.1e}, rhs {:.6} ± {:.1e} ({:.2} combined stderr)", p.lhs, p.lhs_stderr, p.rhs, p.rhs_stderr, p.discrepancy),
        ));
        out.verdicts.push(Verdict::new(
            &format!("laplace precision t={tv}"),
            rel <= s.stderr_target,
            format!("combined relative stderr {rel:.2e} (target {})", s.stderr_target),
        ));
        probes.push(p);
    }
    out.table("laplace.csv", &t, &ctx.provenance());
    out.summary = serde_json::to_value(&probes).expect("probes serialize");
    Ok(out)
}
