//! `clt`: linear statistics of a smooth radial bump against the Gaussian
//! limit.

use plasma2d_core::fluctuations::{clt_check, clt_report, clt_variance_target, TestFunction};
use plasma2d_core::Point;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{kostlan_moduli, strided, Context, LongTable, Outcome, Source, Table};
use crate::config::ExperimentConfig;
use crate::error::{Result, RunnerError};
use crate::registry::Verdict;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CltSection {
    /// Radius a of the bump (1 − r²/a²)⁴.
    pub bump_radius: f64,
    #[serde(default)]
    pub source: Source,
    /// Use every `stride`-th stored configuration of each replica.
    #[serde(default = "one")]
    pub stride: usize,
    #[serde(default = "default_tolerance")]
    pub variance_tolerance: f64,
}

fn one() -> usize {
    1
}

fn default_tolerance() -> f64 {
    0.1
}

fn section(config: &ExperimentConfig) -> Result<CltSection> {
    config.clt.clone().ok_or_else(|| RunnerError::ConfigInvalid("clt needs a [clt] section".into()))
}

pub fn validate(config: &ExperimentConfig) -> Result<()> {
    let s = section(config)?;
    let model = config.model()?;
    config.require_replicas(1)?;
    s.source.check(&model)?;
    if s.source == Source::Ensemble {
        config.sample()?.ensemble_spec(&model, config.seed).validate()?;
    }
    TestFunction::radial_bump(s.bump_radius)?;
    Ok(())
}

pub fn run(ctx: &Context) -> Result<Outcome> {
    let c = ctx.config;
    let s = section(c)?;
    let model = c.model()?;
    let phi = TestFunction::radial_bump(s.bump_radius)?;
    let mut out = Outcome { complete: true, ..Default::default() };
    let (values, report) = match s.source {
        Source::Ensemble => {
            let spec = c.sample()?.ensemble_spec(&model, c.seed);
            out.ensembles.push(spec.key());
            let Some(reps) = ctx.ensemble(spec, c.replicas)? else {
                return Ok(Outcome::incomplete(out.ensembles));
            };
            clt_check(&phi, model.beta, &strided(reps, s.stride))?
        }
        Source::Kostlan => {
            let mean = phi.m0_mean()?;
            let n = model.n as f64;
            let values: Vec<f64> = kostlan_moduli(model.n, c.seed, c.replicas)
                .par_iter()
                .map(|rs| rs.iter().map(|&r| phi.eval(Point::new(r, 0.0))).sum::<f64>() - n * mean)
                .collect();
            let report = clt_report(&values, clt_variance_target(&phi, model.beta)?)?;
            (values, report)
        }
    };

    let mut long = LongTable::new();
    for (i, v) in values.iter().enumerate() {
        long.push(model.n, i, "linstat", *v);
    }
    let (ad_stat, ad_p) = report.anderson_darling.map_or((f64::NAN, f64::NAN), |a| (a.statistic, a.p_value));
    let mut t = Table::new(&["N", "beta", "samples", "mean", "mean_stderr", "variance", "variance_stderr", "target", "relative_error", "ad_statistic", "ad_p"]);
    t.push([
        model.n.to_string(),
        model.beta.to_string(),
        report.replicas.to_string(),
        report.mean.to_string(),
        report.mean_stderr.to_string(),
        report.variance.to_string(),
        report.variance_stderr.to_string(),
        report.target_variance.to_string(),
        report.variance_rel_error().to_string(),
        ad_stat.to_string(),
        ad_p.to_string(),
    ]);
    let rel = report.variance_rel_error();
    out.verdicts = vec![
        Verdict::new(
            "clt variance",
            rel <= s.variance_tolerance,
            format!("{:.5} ± {:.5} vs {:.5} ({:.1}%)", report.variance, report.variance_stderr, report.target_variance, 100.0 * rel),
        ),
        Verdict::new(
            "clt mean",
            report.mean.abs() <= 3.0 * report.mean_stderr,
            format!("{:.5} ± {:.5}", report.mean, report.mean_stderr),
        ),
        Verdict::new("clt normality", ad_p > 0.01, format!("Anderson-Darling A² = {ad_stat:.3}, p = {ad_p:.3}")),
    ];
    out.table("clt.csv", &t, &ctx.provenance());
    out.long(&long);
    out.summary = serde_json::to_value(report).expect("report serializes");
    Ok(out)
}
