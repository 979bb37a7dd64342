//! `verify`: deterministic identities, the exact radial moment and sampler
//! correctness against the Ginibre law.

use plasma2d_core::fluctuations::exp_moment;
use plasma2d_core::model::{energy_f, energy_quadratic, h0_r, zeta, Density, Ensemble};
use plasma2d_core::potential::{newton_discrepancy, pot_reg, CenterSpec};
use plasma2d_core::quadrature::radial_integral;
use plasma2d_core::rng::{child_seed, rng_from_seed};
use plasma2d_core::sampler::{
    ginibre_sample, kostlan_product, mcmc_sample, one_particle_moment2, radial_moment_oracle, ChainSpec, StepScale,
};
use plasma2d_core::stats::{ess_geyer, ks_two_sample, summarize};
use plasma2d_core::{Configuration, ModelParams, Point};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Context, Outcome, Table};
use crate::config::ExperimentConfig;
use crate::ensemble::ChainSettings;
use crate::error::{Result, RunnerError};
use crate::registry::Verdict;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    #[serde(default = "yes")]
    pub identities: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerCheck>,
}

fn yes() -> bool {
    true
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection { identities: true, oracle: None, sampler: None }
    }
}

/// E exp(t Σ|x|²) at β = 2: closed form against Kostlan's product and a
/// Ginibre Monte Carlo mean.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleCheck {
    pub n: usize,
    pub t: f64,
    pub replicas: usize,
}

/// MCMC at β = 2 (pure quadratic) against Ginibre, and one-particle chains
/// against quadrature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerCheck {
    pub ns: Vec<usize>,
    pub chains: usize,
    pub chain: ChainSettings,
    pub reference_replicas: usize,
    /// Smoothing radius of the Pot_{N,ε}(0) statistic.
    pub pot_epsilon: f64,
    pub min_ess: f64,
    pub one_particle_betas: Vec<f64>,
    pub one_particle_ensemble: Ensemble,
    pub one_particle_chain: ChainSettings,
}

const SPLIT_NS: [usize; 4] = [2, 4, 16, 64];
const SPLIT_CONFIGS: usize = 100;
const NEWTON_EPS: [f64; 3] = [0.05, 0.1, 0.3];
const NEWTON_PROBES: [f64; 4] = [1.05, 1.5, 2.0, 4.0];

fn section(config: &ExperimentConfig) -> VerifySection {
    config.verify.clone().unwrap_or_default()
}

pub fn validate(config: &ExperimentConfig) -> Result<()> {
    let v = section(config);
    if let Some(o) = v.oracle {
        if o.n == 0 || o.replicas < 2 {
            return Err(RunnerError::ConfigInvalid("oracle needs n >= 1 and replicas >= 2".into()));
        }
        if o.t >= o.n as f64 {
            return Err(RunnerError::ConfigInvalid(format!("oracle t must be below N = {}", o.n)));
        }
    }
    if let Some(s) = &v.sampler {
        if s.chains == 0 || s.reference_replicas < 2 || s.ns.is_empty() {
            return Err(RunnerError::ConfigInvalid("sampler check needs chains, reference replicas and sizes".into()));
        }
        for c in [&s.chain, &s.one_particle_chain] {
            chain_spec(c, 0).validate()?;
        }
        for &n in &s.ns {
            ModelParams::new(n, 2.0, Ensemble::PureQuadratic)?;
        }
        for &b in &s.one_particle_betas {
            ModelParams::new(1, b, s.one_particle_ensemble)?;
        }
    }
    Ok(())
}

fn chain_spec(c: &ChainSettings, seed: u64) -> ChainSpec {
    ChainSpec {
        n_steps: c.sweeps,
        step_scale: c.step_scale.map_or(StepScale::Auto, StepScale::Fixed),
        burn_in: c.burn_in,
        thinning: c.thinning,
        seed,
    }
}

pub fn run(ctx: &Context) -> Result<Outcome> {
    let c = ctx.config;
    let v = section(c);
    let mut out = Outcome { complete: true, ..Default::default() };
    let mut summary = serde_json::Map::new();
    if v.identities {
        let (table, verdicts) = identities(c.seed)?;
        out.table("identities.csv", &table, &ctx.provenance());
        out.verdicts.extend(verdicts);
    }
    if let Some(o) = v.oracle {
        let seed = child_seed(c.seed, 1);
        let (table, verdicts) = oracle(&o, seed)?;
        out.child_seeds.push(seed);
        out.table("oracle.csv", &table, &ctx.provenance());
        out.verdicts.extend(verdicts);
    }
    if let Some(s) = &v.sampler {
        let seed = child_seed(c.seed, 2);
        let (tables, verdicts, ess) = sampler(s, seed)?;
        out.child_seeds.push(seed);
        for (name, t) in &tables {
            out.table(name, t, &ctx.provenance());
        }
        out.verdicts.extend(verdicts);
        summary.insert("ess".into(), ess);
    }
    summary.insert("checks".into(), out.verdicts.len().into());
    out.summary = serde_json::Value::Object(summary);
    Ok(out)
}

fn random_config(n: usize, seed: u64) -> Result<Configuration> {
    let mut rng = rng_from_seed(seed);
    let pts = (0..n)
        .map(|_| {
            let r = 1.5 * rng.random::<f64>().sqrt();
            Point::polar(r, std::f64::consts::TAU * rng.random::<f64>())
        })
        .collect();
    Ok(Configuration::new(pts)?)
}

fn identities(seed: u64) -> Result<(Table, Vec<Verdict>)> {
    let mut t = Table::new(&["check", "parameter", "value", "target", "error", "tolerance", "pass"]);
    let mut verdicts = Vec::new();
    let m0 = Density::equilibrium();

    let mut worst: f64 = 0.0;
    for (j, &n) in SPLIT_NS.iter().enumerate() {
        let target = -3.0 * (n * n) as f64 / 8.0;
        let mut err: f64 = 0.0;
        for i in 0..SPLIT_CONFIGS {
            let cfg = random_config(n, child_seed(seed, (j * SPLIT_CONFIGS + i) as u64))?;
            let zeta_sum: f64 = cfg.iter().map(|&p| zeta(p)).sum();
            let lhs = energy_f(&cfg, &m0)? + n as f64 * zeta_sum - energy_quadratic(&cfg)?;
            err = err.max((lhs - target).abs() / target.abs());
        }
        t.push(["splitting".to_string(), format!("N={n}"), String::new(), target.to_string(), err.to_string(), "1e-9".into(), (err <= 1e-9).to_string()]);
        worst = worst.max(err);
    }
    verdicts.push(Verdict::new("splitting constant", worst <= 1e-9, format!("max relative error {worst:.2e} over {SPLIT_CONFIGS} configurations per N")));

    let h0_mean = radial_integral(|r| h0_r(r) / std::f64::consts::PI, &[0.0, 1.0], 1e-13)?;
    let err = (h0_mean + 0.25).abs();
    t.push(["h0_mean".to_string(), String::new(), h0_mean.to_string(), "-0.25".into(), err.to_string(), "1e-8".into(), (err <= 1e-8).to_string()]);
    verdicts.push(Verdict::new("integral of h0 against m0", err <= 1e-8, format!("{h0_mean:.12} (error {err:.2e})")));

    let center = CenterSpec::default();
    let mut worst: f64 = 0.0;
    for &eps in &NEWTON_EPS {
        let d = newton_discrepancy(eps, &center, &NEWTON_PROBES)?;
        t.push(["newton".to_string(), format!("eps={eps}"), String::new(), "0".into(), d.to_string(), "1e-10".into(), (d <= 1e-10).to_string()]);
        worst = worst.max(d);
    }
    verdicts.push(Verdict::new("newton exactness", worst <= 1e-10, format!("max deviation {worst:.2e}")));
    Ok((t, verdicts))
}

fn oracle(o: &OracleCheck, seed: u64) -> Result<(Table, Vec<Verdict>)> {
    let exact = radial_moment_oracle(o.n, 2.0, o.t)?;
    let product = kostlan_product(o.n, o.t);
    let rel = (exact - product).abs() / product;
    let sums = (0..o.replicas)
        .into_par_iter()
        .map(|i| Ok(ginibre_sample(o.n, child_seed(seed, i as u64))?.moment2()))
        .collect::<Result<Vec<f64>>>()?;
    let mc = exp_moment(&sums, o.t)?;
    let z = (mc.value - exact) / mc.stderr;
    let mut t = Table::new(&["N", "t", "oracle", "kostlan_product", "relative_error", "mc_mean", "mc_stderr", "z", "replicas"]);
    t.push([o.n.to_string(), o.t.to_string(), exact.to_string(), product.to_string(), rel.to_string(), mc.value.to_string(), mc.stderr.to_string(), z.to_string(), o.replicas.to_string()]);
    let verdicts = vec![
        Verdict::new("oracle matches kostlan product", rel <= 1e-12, format!("relative error {rel:.2e}")),
        Verdict::new("ginibre monte carlo matches oracle", z.abs() <= 3.0, format!("{:.6} ± {:.6} vs {exact:.6} (z = {z:.2})", mc.value, mc.stderr)),
    ];
    Ok((t, verdicts))
}

const STATS: [&str; 3] = ["sum_abs_sq", "count_half_disk", "pot_origin"];

fn statistics(cfg: &Configuration, eps: f64) -> Result<[f64; 3]> {
    Ok([cfg.moment2(), cfg.count_in_disk(Point::ORIGIN, 0.5) as f64, pot_reg(cfg, Point::ORIGIN, eps)?])
}

fn sampler(s: &SamplerCheck, seed: u64) -> Result<(Vec<(String, Table)>, Vec<Verdict>, serde_json::Value)> {
    let mut ks_table = Table::new(&["N", "statistic", "mcmc_samples", "ess", "reference_replicas", "ks_statistic", "ks_p", "pass"]);
    let mut verdicts = Vec::new();
    let mut ess_summary = serde_json::Map::new();
    for (j, &n) in s.ns.iter().enumerate() {
        let params = ModelParams::new(n, 2.0, Ensemble::PureQuadratic)?;
        let base = child_seed(seed, j as u64);
        let chains = (0..s.chains)
            .into_par_iter()
            .map(|c| {
                let (cfgs, _) = mcmc_sample(params, chain_spec(&s.chain, child_seed(base, c as u64)))?;
                cfgs.iter().map(|cfg| statistics(cfg, s.pot_epsilon)).collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let ref_seed = child_seed(base, u64::MAX);
        let reference = (0..s.reference_replicas)
            .into_par_iter()
            .map(|i| statistics(&ginibre_sample(n, child_seed(ref_seed, i as u64))?, s.pot_epsilon))
            .collect::<Result<Vec<_>>>()?;
        for (k, name) in STATS.iter().enumerate() {
            let ess: f64 = chains
                .iter()
                .map(|ch| ess_geyer(&ch.iter().map(|v| v[k]).collect::<Vec<_>>()).unwrap_or(0.0))
                .sum();
            let pooled: Vec<f64> = chains.iter().flatten().map(|v| v[k]).collect();
            let refs: Vec<f64> = reference.iter().map(|v| v[k]).collect();
            let ks = ks_two_sample(&pooled, &refs);
            let pass = ks.p_value > 0.01 && ess >= s.min_ess;
            ks_table.push([n.to_string(), name.to_string(), pooled.len().to_string(), ess.to_string(), refs.len().to_string(), ks.statistic.to_string(), ks.p_value.to_string(), pass.to_string()]);
            ess_summary.insert(format!("N{n}_{name}"), ess.into());
            verdicts.push(Verdict::new(
                &format!("mcmc vs ginibre N={n} {name}"),
                pass,
                format!("KS p = {:.4}, ESS = {ess:.0} (need > 0.01 and >= {})", ks.p_value, s.min_ess),
            ));
        }
    }

    let mut one = Table::new(&["beta", "ensemble", "samples", "ess", "mean_abs_sq", "stderr", "quadrature", "z", "pass"]);
    for (j, &beta) in s.one_particle_betas.iter().enumerate() {
        let params = ModelParams::new(1, beta, s.one_particle_ensemble)?;
        let (cfgs, _) = mcmc_sample(params, chain_spec(&s.one_particle_chain, child_seed(seed, 1000 + j as u64)))?;
        let xs: Vec<f64> = cfgs.iter().map(|c| c.moment2()).collect();
        let ess = ess_geyer(&xs).unwrap_or(0.0);
        let sm = summarize(&xs);
        let stderr = (sm.variance / ess.max(1.0)).sqrt();
        let exact = one_particle_moment2(&params)?;
        let z = (sm.mean - exact) / stderr;
        let pass = z.abs() <= 3.0;
        one.push([beta.to_string(), s.one_particle_ensemble.to_string(), xs.len().to_string(), ess.to_string(), sm.mean.to_string(), stderr.to_string(), exact.to_string(), z.to_string(), pass.to_string()]);
        verdicts.push(Verdict::new(&format!("one particle beta={beta}"), pass, format!("{:.5} ± {stderr:.5} vs {exact:.5} (z = {z:.2})", sm.mean)));
    }
    Ok((vec![("sampler_ks.csv".into(), ks_table), ("one_particle.csv".into(), one)], verdicts, serde_json::Value::Object(ess_summary)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identities_run_by_default() {
        let c = ExperimentConfig::new(crate::config::Kind::Verify, 0);
        let v = section(&c);
        assert!(v.identities && v.oracle.is_none() && v.sampler.is_none());
        assert!(validate(&c).is_ok());
    }

    #[test]
    fn oracle_t_must_stay_below_n() {
        let mut c = ExperimentConfig::new(crate::config::Kind::Verify, 0);
        c.verify = Some(VerifySection { identities: false, oracle: Some(OracleCheck { n: 4, t: 4.0, replicas: 10 }), sampler: None });
        assert!(validate(&c).is_err());
        c.verify.as_mut().unwrap().oracle.as_mut().unwrap().t = 1.0;
        assert!(validate(&c).is_ok());
    }
}
