//! `max-ladder`: max Pot_{N,ε} / log N along a ladder of N, its ordering in
//! β, and tail probabilities of the maximum.

use plasma2d_core::extremes::{beta_ordering, lln_ladder, max_report, tail_probability, MaxReport, MIN_LADDER_REPLICAS, MIN_TAIL_REPLICAS};
use plasma2d_core::stats::summarize;
use plasma2d_core::{Configuration, ModelParams};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{strided, Context, LongTable, Outcome, Table};
use crate::config::ExperimentConfig;
use crate::ensemble::{ChainSettings, EnsembleSpec};
use crate::error::{Result, RunnerError};
use crate::registry::Verdict;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderSection {
    pub ns: Vec<usize>,
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Admissible range of mean ratios, in units of 1/√β.
    #[serde(default = "default_band")]
    pub band: (f64, f64),
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ordering: Option<OrderingCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<TailCheck>,
}

/// Mean ratios at one N for several β; β values other than the model's are
/// sampled by MCMC.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderingCheck {
    pub n: usize,
    pub betas: Vec<f64>,
    pub chains: usize,
    pub chain: ChainSettings,
    #[serde(default = "one")]
    pub stride: usize,
}

/// P[max ≥ α log N / √β] is 0 at `upper_alpha` and 1 at `lower_alpha`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailCheck {
    pub n: usize,
    pub replicas: usize,
    pub upper_alpha: f64,
    pub lower_alpha: f64,
}

fn default_radius() -> f64 {
    0.8
}

fn default_lambda() -> f64 {
    4.0
}

fn default_band() -> (f64, f64) {
    (0.6, 1.0)
}

fn one() -> usize {
    1
}

fn section(config: &ExperimentConfig) -> Result<LadderSection> {
    config.ladder.clone().ok_or_else(|| RunnerError::ConfigInvalid("max-ladder needs a [ladder] section".into()))
}

fn spec_at(config: &ExperimentConfig, n: usize) -> Result<EnsembleSpec> {
    let model = ModelParams { n, ..config.model()? };
    Ok(config.sample()?.ensemble_spec(&model, config.seed))
}

fn ordering_spec(config: &ExperimentConfig, o: &OrderingCheck, beta: f64) -> Result<(EnsembleSpec, usize, usize)> {
    let model = config.model()?;
    if beta == model.beta {
        return Ok((spec_at(config, o.n)?, config.replicas, 1));
    }
    let params = ModelParams::new(o.n, beta, model.ensemble)?;
    Ok((EnsembleSpec::mcmc(params, config.seed, o.chain), o.chains, o.stride))
}

pub fn validate(config: &ExperimentConfig) -> Result<()> {
    let s = section(config)?;
    config.require_replicas(MIN_LADDER_REPLICAS)?;
    if s.ns.is_empty() || s.ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(RunnerError::ConfigInvalid("ladder ns must be nonempty and increasing".into()));
    }
    for &n in &s.ns {
        spec_at(config, n)?.validate()?;
    }
    if let Some(o) = &s.ordering {
        if o.betas.len() < 2 {
            return Err(RunnerError::ConfigInvalid("ordering needs at least two beta values".into()));
        }
        for &b in &o.betas {
            ordering_spec(config, o, b)?.0.validate()?;
        }
    }
    if let Some(t) = &s.tail {
        if t.replicas < MIN_TAIL_REPLICAS {
            return Err(RunnerError::ConfigInvalid(format!("tail needs replicas >= {MIN_TAIL_REPLICAS}")));
        }
        spec_at(config, t.n)?.validate()?;
    }
    Ok(())
}

fn maxima(configs: &[Configuration], beta: f64, s: &LadderSection) -> Result<Vec<MaxReport>> {
    Ok(configs.par_iter().map(|c| max_report(c, beta, s.radius, s.lambda, None)).collect::<plasma2d_core::Result<_>>()?)
}

pub fn run(ctx: &Context) -> Result<Outcome> {
    let c = ctx.config;
    let s = section(c)?;
    let beta = c.model()?.beta;
    let mut out = Outcome { complete: true, ..Default::default() };
    let mut long = LongTable::new();
    let mut pending = false;

    let load = |spec: EnsembleSpec, count: usize, stride: usize, out: &mut Outcome| -> Result<Option<Vec<Configuration>>> {
        if !out.ensembles.contains(&spec.key()) {
            out.ensembles.push(spec.key());
        }
        Ok(ctx.ensemble(spec, count)?.map(|r| strided(r, stride)))
    };

    let mut ratios = Vec::new();
    for &n in &s.ns {
        match load(spec_at(c, n)?, c.replicas, 1, &mut out)? {
            Some(cfgs) => {
                let reports = maxima(&cfgs, beta, &s)?;
                for (i, r) in reports.iter().enumerate() {
                    long.push(n, i, "max_ratio", r.ratio);
                    long.push(n, i, "max_value", r.value);
                }
                ratios.push((n, reports.iter().map(|r| r.ratio).collect::<Vec<_>>()));
            }
            None => pending = true,
        }
    }

    let mut ordering_rows = Vec::new();
    if let Some(o) = &s.ordering {
        for &b in &o.betas {
            let (spec, count, stride) = ordering_spec(c, o, b)?;
            match load(spec, count, stride, &mut out)? {
                Some(cfgs) => {
                    let xs: Vec<f64> = maxima(&cfgs, b, &s)?.iter().map(|r| r.ratio).collect();
                    let sm = summarize(&xs);
                    ordering_rows.push((b, sm.mean, sm.stderr, xs.len()));
                }
                None => pending = true,
            }
        }
    }

    let mut tail_reports = None;
    if let Some(t) = &s.tail {
        match load(spec_at(c, t.n)?, t.replicas, 1, &mut out)? {
            Some(cfgs) => tail_reports = Some(maxima(&cfgs, beta, &s)?),
            None => pending = true,
        }
    }
    if pending {
        return Ok(Outcome::incomplete(out.ensembles));
    }

    let ladder = lln_ladder(beta, &ratios)?;
    out.outputs.push(("ladder.csv".into(), ladder.to_csv().into_bytes()));
    let (lo, hi) = s.band;
    let means: Vec<String> = ladder.rows.iter().map(|r| format!("N={}: {:.4} ± {:.4}", r.n, r.mean_ratio, r.stderr)).collect();
    out.verdicts.push(Verdict::new("max ratio increasing in N", ladder.increasing(), means.join(", ")));
    let (band_lo, band_hi) = (lo * ladder.target, hi * ladder.target);
    let outside: Vec<String> = ladder
        .rows
        .iter()
        .filter(|r| !(band_lo..=band_hi).contains(&r.mean_ratio))
        .map(|r| format!("N={}", r.n))
        .collect();
    let outside = if outside.is_empty() { "all N inside".to_string() } else { format!("outside: {}", outside.join(", ")) };
    out.verdicts.push(Verdict::new(
        "max ratio within band",
        ladder.within_band(lo, hi),
        format!("band [{band_lo:.4}, {band_hi:.4}], {outside}"),
    ));

    if let Some(o) = &s.ordering {
        let mut t = Table::new(&["N", "beta", "samples", "mean_ratio", "stderr"]);
        for &(b, m, se, k) in &ordering_rows {
            t.push([o.n.to_string(), b.to_string(), k.to_string(), m.to_string(), se.to_string()]);
        }
        out.table("ordering.csv", &t, &ctx.provenance());
        let triples: Vec<(f64, f64, f64)> = ordering_rows.iter().map(|&(b, m, se, _)| (b, m, se)).collect();
        let detail: Vec<String> = ordering_rows.iter().map(|(b, m, se, _)| format!("beta={b}: {m:.4} ± {se:.4}")).collect();
        out.verdicts.push(Verdict::new(&format!("beta ordering at N={}", o.n), beta_ordering(&triples), detail.join(", ")));
    }

    if let (Some(t), Some(reports)) = (&s.tail, &tail_reports) {
        let mut table = Table::new(&["N", "alpha", "threshold", "exceed", "replicas", "probability", "wilson_lo", "wilson_hi"]);
        let upper = tail_probability(reports, t.upper_alpha, beta)?;
        let lower = tail_probability(reports, t.lower_alpha, beta)?;
        for e in [&upper, &lower] {
            table.push([t.n.to_string(), e.alpha.to_string(), e.threshold.to_string(), e.exceed.to_string(), e.replicas.to_string(), e.probability.to_string(), e.wilson_lo.to_string(), e.wilson_hi.to_string()]);
        }
        out.table("tail.csv", &table, &ctx.provenance());
        out.verdicts.push(Verdict::new(
            &format!("no max above {} log N / sqrt(beta)", t.upper_alpha),
            upper.exceed == 0,
            format!("{}/{} exceed", upper.exceed, upper.replicas),
        ));
        out.verdicts.push(Verdict::new(
            &format!("every max above {} log N / sqrt(beta)", t.lower_alpha),
            lower.exceed == lower.replicas,
            format!("{}/{} exceed", lower.exceed, lower.replicas),
        ));
    }

    out.long(&long);
    out.summary = serde_json::json!({ "ladder": ladder, "monotone_trend": ladder.monotone_trend() });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(ladder: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml(&format!(
            "kind = \"max-ladder\"\nseed = 1\nreplicas = 30\n[model]\nn = 256\nbeta = 2.0\nensemble = \"pure-quadratic\"\n[sample]\nmethod = \"ginibre\"\n[ladder]\n{ladder}"
        ))
        .unwrap()
    }

    #[test]
    fn ladder_sizes_must_increase() {
        assert!(validate(&config("ns = [64, 256]")).is_ok());
        assert!(validate(&config("ns = [256, 64]")).is_err());
        assert!(validate(&config("ns = []")).is_err());
    }

    #[test]
    fn ordering_reuses_the_model_ensemble_at_its_beta() {
        let c = config("ns = [64]\n[ladder.ordering]\nn = 128\nbetas = [1.0, 2.0]\nchains = 2\n[ladder.ordering.chain]\nsweeps = 100\nburn_in = 10\nthinning = 1");
        let o = c.ladder.as_ref().unwrap().ordering.clone().unwrap();
        let (same, count, _) = ordering_spec(&c, &o, 2.0).unwrap();
        assert_eq!((same.method, same.n, count), (crate::ensemble::Method::Ginibre, 128, 30));
        let (other, count, _) = ordering_spec(&c, &o, 1.0).unwrap();
        assert_eq!((other.method, other.beta, count), (crate::ensemble::Method::Mcmc, 1.0, 2));
    }

    #[test]
    fn tails_need_enough_replicas() {
        assert!(validate(&config("ns = [64]\n[ladder.tail]\nn = 64\nreplicas = 50\nupper_alpha = 3.0\nlower_alpha = 0.2")).is_err());
    }
}
