//! `field`: the regularized potential on a grid and the growth of
//! Var Φ_k(0) with k.

use plasma2d_core::gmc::{ell, phi_k_at, phi_k_origin};
use plasma2d_core::potential::{pot_field, CenterSpec, GridSpec};
use plasma2d_core::stats::{summarize, variance_stderr};
use plasma2d_core::Point;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{kostlan_moduli, Context, LongTable, Outcome, Source, Table};
use crate::config::ExperimentConfig;
use crate::error::{Result, RunnerError};
use crate::registry::Verdict;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSection {
    /// Smoothing indices k, ℓ(k) = e^{−k}, for Var Φ_k(0).
    pub ks: Vec<u32>,
    #[serde(default)]
    pub source: Source,
    /// Replicas whose Pot_{N,ε} grid is written out (ensemble source only).
    #[serde(default)]
    pub export_fields: usize,
    #[serde(default = "default_radius")]
    pub radius: f64,
    /// ε = λ N^{−1/2} for exported grids.
    #[serde(default = "default_lambda")]
    pub lambda: f64,
}

fn default_radius() -> f64 {
    0.8
}

fn default_lambda() -> f64 {
    4.0
}

fn section(config: &ExperimentConfig) -> Result<FieldSection> {
    config.field.clone().ok_or_else(|| RunnerError::ConfigInvalid("field needs a [field] section".into()))
}

pub fn validate(config: &ExperimentConfig) -> Result<()> {
    let s = section(config)?;
    let model = config.model()?;
    config.require_replicas(2)?;
    s.source.check(&model)?;
    match s.source {
        Source::Ensemble => config.sample()?.ensemble_spec(&model, config.seed).validate()?,
        Source::Kostlan if s.export_fields > 0 => {
            return Err(RunnerError::ConfigInvalid("kostlan replicas carry no angles; export_fields must be 0".into()))
        }
        Source::Kostlan => {}
    }
    if s.export_fields > config.replicas {
        return Err(RunnerError::ConfigInvalid("export_fields exceeds replicas".into()));
    }
    GridSpec::new(s.radius, s.lambda / (model.n as f64).sqrt() / 2.0)?;
    for &k in &s.ks {
        if ell(k) * (model.n as f64).sqrt() < 2.0 {
            return Err(plasma2d_core::Error::ScaleTooSmall { scale: ell(k), reason: format!("l(k) sqrt(N) < 2 at N = {}", model.n) }.into());
        }
    }
    Ok(())
}

pub fn run(ctx: &Context) -> Result<Outcome> {
    let c = ctx.config;
    let s = section(c)?;
    let model = c.model()?;
    let center = CenterSpec::default();
    let mut out = Outcome { complete: true, ..Default::default() };
    let mut long = LongTable::new();
    // values[k][replica]
    let values: Vec<Vec<f64>> = match s.source {
        Source::Ensemble => {
            let spec = c.sample()?.ensemble_spec(&model, c.seed);
            out.ensembles.push(spec.key());
            let Some(reps) = ctx.ensemble(spec, c.replicas)? else {
                return Ok(Outcome::incomplete(out.ensembles));
            };
            let configs: Vec<_> = reps.into_iter().map(|mut r| r.swap_remove(0)).collect();
            let eps = s.lambda / (model.n as f64).sqrt();
            let grid = GridSpec::new(s.radius, eps / 2.0)?;
            let mut fields = Table::new(&["replica", "x", "y", "pot"]);
            for (i, cfg) in configs.iter().take(s.export_fields).enumerate() {
                let f = pot_field(cfg, eps, grid)?;
                for (p, v) in f.nodes.iter().zip(&f.values) {
                    fields.push([i.to_string(), p.x.to_string(), p.y.to_string(), v.to_string()]);
                }
            }
            if s.export_fields > 0 {
                let mut comments = ctx.provenance();
                comments.push(format!("epsilon={eps}, spacing={}, radius={}", grid.spacing, grid.radius));
                out.table("fields.csv", &fields, &comments);
            }
            s.ks
                .iter()
                .map(|&k| configs.par_iter().map(|cfg| Ok(phi_k_at(cfg, Point::ORIGIN, k, model.beta, &center)?)).collect::<Result<Vec<f64>>>())
                .collect::<Result<_>>()?
        }
        Source::Kostlan => {
            let moduli = kostlan_moduli(model.n, c.seed, c.replicas);
            s.ks
                .iter()
                .map(|&k| moduli.par_iter().map(|m| Ok(phi_k_origin(m, k, model.beta, &center)?)).collect::<Result<Vec<f64>>>())
                .collect::<Result<_>>()?
        }
    };

    let mut t = Table::new(&["k", "ell", "replicas", "mean", "variance", "variance_stderr", "lower", "upper", "in_band"]);
    for (&k, xs) in s.ks.iter().zip(&values) {
        for (i, v) in xs.iter().enumerate() {
            long.push(model.n, i, &format!("phi_{k}_origin"), *v);
        }
        let sm = summarize(xs);
        let (lo, hi) = (k as f64 - 2.0, k as f64 + 2.0);
        let ok = sm.variance >= lo && sm.variance <= hi;
        t.push([k.to_string(), ell(k).to_string(), xs.len().to_string(), sm.mean.to_string(), sm.variance.to_string(), variance_stderr(xs).to_string(), lo.to_string(), hi.to_string(), ok.to_string()]);
        out.verdicts.push(Verdict::new(&format!("var phi_{k}(0) in [{lo}, {hi}]"), ok, format!("{:.4} ± {:.4}", sm.variance, variance_stderr(xs))));
    }
    out.table("variance.csv", &t, &ctx.provenance());
    out.long(&long);
    out.summary = serde_json::json!({ "ks": s.ks, "replicas": c.replicas, "source": s.source });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(extra: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml(&format!(
            "kind = \"field\"\nseed = 1\nreplicas = 10\n[model]\nn = 4096\nbeta = 2.0\nensemble = \"pure-quadratic\"\n[field]\nks = [1, 2, 3]\n{extra}"
        ))
        .unwrap()
    }

    #[test]
    fn kostlan_source_carries_no_fields() {
        assert!(validate(&config("source = \"kostlan\"")).is_ok());
        assert!(validate(&config("source = \"kostlan\"\nexport_fields = 1")).is_err());
        // the ensemble source needs a [sample] section
        assert!(validate(&config("")).is_err());
    }

    #[test]
    fn scales_below_the_interparticle_distance_are_refused() {
        let c = config("source = \"kostlan\"");
        let mut deep = c.clone();
        deep.field.as_mut().unwrap().ks = vec![5];
        assert!(matches!(validate(&deep), Err(RunnerError::Core(plasma2d_core::Error::ScaleTooSmall { .. }))));
    }
}
