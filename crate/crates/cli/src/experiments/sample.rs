//! `sample`: fill a shared ensemble and tabulate per-replica diagnostics.

use plasma2d_core::rng::child_seed;

use super::{Context, LongTable, Outcome, Table};
use crate::config::ExperimentConfig;
use crate::ensemble::EnsembleStore;
use crate::error::Result;

pub fn validate(config: &ExperimentConfig) -> Result<()> {
    config.require_replicas(1)?;
    config.sample()?.ensemble_spec(&config.model()?, config.seed).validate()
}

pub fn run(ctx: &Context) -> Result<Outcome> {
    let c = ctx.config;
    let model = c.model()?;
    let spec = c.sample()?.ensemble_spec(&model, c.seed);
    let store = EnsembleStore::open(ctx.root, spec)?;
    let done = store.ensure(c.replicas, ctx.budget.get())?;
    if done < c.replicas {
        return Ok(Outcome::incomplete(vec![spec.key()]));
    }

    let entries = store.entries()?;
    let configs = store.load(c.replicas)?;
    let mut table = Table::new(&["replica", "seed", "samples", "acceptance", "ess_energy", "step_scale"]);
    let mut long = LongTable::new();
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for (i, per) in configs.iter().enumerate() {
        let e = &entries[&i];
        table.push([
            i.to_string(),
            e.seed.to_string(),
            per.len().to_string(),
            opt(e.acceptance),
            opt(e.ess_energy),
            opt(e.step_scale),
        ]);
        let mean_sq = per.iter().map(|cfg| cfg.moment2()).sum::<f64>() / per.len() as f64;
        long.push(model.n, i, "sum_abs_sq", mean_sq);
    }

    let mut out = Outcome {
        complete: true,
        child_seeds: (0..c.replicas as u64).map(|i| child_seed(c.seed, i)).collect(),
        ensembles: vec![spec.key()],
        summary: serde_json::json!({ "ensemble": spec.key(), "replicas": c.replicas, "per_replica": spec.per_replica() }),
        ..Default::default()
    };
    out.table("replicas.csv", &table, &ctx.provenance());
    out.long(&long);
    Ok(out)
}
