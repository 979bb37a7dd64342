//! `gmc`: chaos measures of the plasma against those of the reference
//! Gaussian field, plus the normalizer scaling, joint moments and the
//! covariance cross-check.

use plasma2d_core::gmc::{
    chaos_measure, ell, empirical_normalizer, gmc_compare, log_mean_exp, moment_identity_probe, nu_measure, phi_k_field, phi_k_origin,
    psi_cov_direct, sample_psi, ChaosParams, CovarianceModel, MomentPoint, Normalization, TestDisk, MIN_COMPARE_REPLICAS,
};
use plasma2d_core::potential::{CenterSpec, GridSpec};
use plasma2d_core::rng::{child_seed, rng_from_seed};
use plasma2d_core::stats::linear_fit;
use plasma2d_core::{Point, ModelParams};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{kostlan_moduli, Context, Outcome, Source, Table};
use crate::config::ExperimentConfig;
use crate::error::{Result, RunnerError};
use crate::registry::Verdict;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GmcSection {
    pub gamma: f64,
    pub k: u32,
    #[serde(default = "default_radius")]
    pub grid_radius: f64,
    /// Grid spacing; ℓ(k)/2 when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<f64>,
    #[serde(default = "default_disks")]
    pub disks: Vec<TestDisk>,
    /// Replicas of the Gaussian field; 0 skips the comparison.
    #[serde(default)]
    pub psi_replicas: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope: Option<SlopeCheck>,
    /// Joint moment probes, each a list of (x, k, γ) terms.
    #[serde(default)]
    pub moments: Vec<Vec<MomentPoint>>,
    /// Random (x, z, k, n) probes of the covariance cross-check.
    #[serde(default)]
    pub cov_probes: usize,
}

/// Slope of log E e^{γΦ_k(0)} in k from Kostlan replicas (β = 2).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlopeCheck {
    pub n: usize,
    pub ks: Vec<u32>,
    pub replicas: usize,
    /// Relative tolerance around γ²/2.
    #[serde(default = "default_slope_tolerance")]
    pub tolerance: f64,
}

fn default_radius() -> f64 {
    0.6
}

fn default_disks() -> Vec<TestDisk> {
    vec![TestDisk { center: Point::ORIGIN, radius: 0.3 }, TestDisk { center: Point::new(0.4, 0.0), radius: 0.2 }]
}

fn default_slope_tolerance() -> f64 {
    0.2
}

fn section(config: &ExperimentConfig) -> Result<GmcSection> {
    config.gmc.clone().ok_or_else(|| RunnerError::ConfigInvalid("gmc needs a [gmc] section".into()))
}

fn grid(s: &GmcSection) -> Result<GridSpec> {
    Ok(GridSpec::new(s.grid_radius, s.spacing.unwrap_or(ell(s.k) / 2.0))?)
}

fn needs_plasma(s: &GmcSection) -> bool {
    s.psi_replicas > 0 || !s.moments.is_empty()
}

pub fn validate(config: &ExperimentConfig) -> Result<()> {
    let s = section(config)?;
    let model = config.model()?;
    ChaosParams::new(s.gamma, s.k, Normalization::Empirical)?;
    grid(&s)?.check_resolves(ell(s.k))?;
    if needs_plasma(&s) {
        config.sample()?.ensemble_spec(&model, config.seed).validate()?;
        let scale = ell(s.k) * (model.n as f64).sqrt();
        if scale < 2.0 {
            return Err(plasma2d_core::Error::ScaleTooSmall { scale: ell(s.k), reason: format!("l(k) sqrt(N) = {scale:.3} < 2") }.into());
        }
    }
    if s.psi_replicas > 0 {
        if s.psi_replicas < MIN_COMPARE_REPLICAS {
            return Err(RunnerError::ConfigInvalid(format!("psi_replicas must be 0 or >= {MIN_COMPARE_REPLICAS}")));
        }
        config.require_replicas(MIN_COMPARE_REPLICAS)?;
    }
    if !s.moments.is_empty() {
        config.require_replicas(2)?;
    }
    if let Some(sl) = &s.slope {
        Source::Kostlan.check(&ModelParams { n: sl.n, ..model })?;
        if sl.ks.len() < 2 || sl.replicas < 2 {
            return Err(RunnerError::ConfigInvalid("slope needs two or more k values and replicas".into()));
        }
    }
    Ok(())
}

pub fn run(ctx: &Context) -> Result<Outcome> {
    let c = ctx.config;
    let s = section(c)?;
    let model = c.model()?;
    let cov = CovarianceModel::new(CenterSpec::default());
    let mut out = Outcome { complete: true, ..Default::default() };
    let mut summary = serde_json::Map::new();

    let plasma = if needs_plasma(&s) {
        let spec = c.sample()?.ensemble_spec(&model, c.seed);
        out.ensembles.push(spec.key());
        let Some(reps) = ctx.ensemble(spec, c.replicas)? else {
            return Ok(Outcome::incomplete(out.ensembles));
        };
        reps.into_iter().map(|mut r| r.swap_remove(0)).collect()
    } else {
        Vec::new()
    };

    if let Some(sl) = &s.slope {
        let seed = child_seed(c.seed, 1);
        out.child_seeds.push(seed);
        let moduli = kostlan_moduli(sl.n, seed, sl.replicas);
        let mut t = Table::new(&["k", "ell", "log_normalizer", "gaussian_log_normalizer", "replicas"]);
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for &k in &sl.ks {
            let phis = moduli.par_iter().map(|m| Ok(phi_k_origin(m, k, model.beta, &cov.center)?)).collect::<Result<Vec<f64>>>()?;
            let ln = log_mean_exp(phis.iter().map(|p| s.gamma * p));
            let gauss = 0.5 * s.gamma * s.gamma * cov.psi_cov(Point::ORIGIN, Point::ORIGIN, k, k);
            t.push([k.to_string(), ell(k).to_string(), ln.to_string(), gauss.to_string(), sl.replicas.to_string()]);
            xs.push(k as f64);
            ys.push(ln);
        }
        let slope = linear_fit(&xs, &ys).slope;
        let target = 0.5 * s.gamma * s.gamma;
        let mut comments = ctx.provenance();
        comments.push(format!("kostlan N={}, gamma={}", sl.n, s.gamma));
        out.table("slope.csv", &t, &comments);
        out.verdicts.push(Verdict::new(
            "normalizer slope",
            (slope - target).abs() <= sl.tolerance * target,
            format!("slope {slope:.4} vs {target:.4} ± {:.0}% (N = {}, k = {:?})", 100.0 * sl.tolerance, sl.n, sl.ks),
        ));
        summary.insert("slope".into(), slope.into());
    }

    if !s.moments.is_empty() {
        let mut t = Table::new(&["probe", "j", "lhs", "lhs_stderr", "rhs", "dlog", "dlog_stderr", "z", "replicas", "pass"]);
        for (i, pts) in s.moments.iter().enumerate() {
            let p = moment_identity_probe(pts, &plasma, model.beta, &cov)?;
            t.push([i.to_string(), pts.len().to_string(), p.lhs.to_string(), p.lhs_stderr.to_string(), p.rhs.to_string(), p.dlog.to_string(), p.dlog_stderr.to_string(), p.z_score.to_string(), p.replicas.to_string(), p.pass().to_string()]);
            out.verdicts.push(Verdict::new(
                &format!("moment identity probe {i} (j={})", pts.len()),
                p.pass(),
                format!("log lhs − log rhs = {:.4} ± {:.4}", p.dlog, p.dlog_stderr),
            ));
        }
        out.table("moments.csv", &t, &ctx.provenance());
    }

    if s.cov_probes > 0 {
        let seed = child_seed(c.seed, 2);
        out.child_seeds.push(seed);
        let mut rng = rng_from_seed(seed);
        let mut draw = || {
            let r = 0.8 * rng.random::<f64>().sqrt();
            let p = Point::polar(r, std::f64::consts::TAU * rng.random::<f64>());
            (p, rng.random_range(1..=4u32))
        };
        let probes: Vec<(Point, u32, Point, u32)> = (0..s.cov_probes).map(|_| {
            let (x, k) = draw();
            let (z, n) = draw();
            (x, k, z, n)
        }).collect();
        let rows: Vec<(f64, f64)> = probes.par_iter().map(|&(x, k, z, n)| (cov.psi_cov(x, z, k, n), psi_cov_direct(x, z, k, n, &cov.center))).collect();
        let mut t = Table::new(&["x", "y", "zx", "zy", "k", "n", "profile", "direct", "abs_diff"]);
        let mut worst: f64 = 0.0;
        for (&(x, k, z, n), &(a, b)) in probes.iter().zip(&rows) {
            worst = worst.max((a - b).abs());
            t.push([x.x.to_string(), x.y.to_string(), z.x.to_string(), z.y.to_string(), k.to_string(), n.to_string(), a.to_string(), b.to_string(), (a - b).abs().to_string()]);
        }
        out.table("covariance.csv", &t, &ctx.provenance());
        out.verdicts.push(Verdict::new("covariance cross-check", worst <= 1e-4, format!("max |profile − direct| = {worst:.2e} over {} probes", s.cov_probes)));
    }

    if s.psi_replicas > 0 {
        let g = grid(&s)?;
        let params = ChaosParams::new(s.gamma, s.k, Normalization::Empirical)?;
        let fields = plasma.par_iter().map(|cfg| Ok(phi_k_field(cfg, s.k, g, model.beta, &cov.center)?)).collect::<Result<Vec<_>>>()?;
        let norm = empirical_normalizer(&fields, s.gamma)?;
        let mu = fields.iter().map(|f| chaos_measure(f, params, &norm)).collect::<plasma2d_core::Result<Vec<_>>>()?;
        drop(fields);
        let seed = child_seed(c.seed, 3);
        out.child_seeds.push(seed);
        let psi = sample_psi(g, s.k, &cov, seed, s.psi_replicas)?;
        let nu = nu_measure(&psi.fields, s.gamma, s.k, &cov)?;
        let report = gmc_compare(&mu, &nu, &s.disks)?;

        let mut header = vec!["replica".to_string(), "side".to_string()];
        header.extend((0..s.disks.len()).map(|i| format!("disk_{i}")));
        let mut masses = Table { header, rows: Vec::new() };
        for (side, n) in [("mu", mu.len()), ("nu", nu.len())] {
            for r in 0..n {
                let mut row = vec![r.to_string(), side.to_string()];
                for d in &report.disks {
                    let m = if side == "mu" { &d.mu_masses } else { &d.nu_masses };
                    row.push(m[r].to_string());
                }
                masses.rows.push(row);
            }
        }
        let mut comments = ctx.provenance();
        comments.push(format!("gamma={}, k={}, spacing={}, radius={}, jitter={:e}", s.gamma, s.k, g.spacing, g.radius, psi.jitter));
        for (i, d) in s.disks.iter().enumerate() {
            comments.push(format!("disk_{i}=D(({}, {}), {})", d.center.x, d.center.y, d.radius));
        }
        out.table("masses.csv", &masses, &comments);

        let mut t = Table::new(&["disk", "cx", "cy", "radius", "ks_statistic", "ks_p", "mu_mean", "mu_variance", "nu_mean", "nu_variance", "variance_ratio", "elevated_variance"]);
        for (i, d) in report.disks.iter().enumerate() {
            t.push([i.to_string(), d.disk.center.x.to_string(), d.disk.center.y.to_string(), d.disk.radius.to_string(), d.ks.statistic.to_string(), d.ks.p_value.to_string(), d.mu_mean.to_string(), d.mu_variance.to_string(), d.nu_mean.to_string(), d.nu_variance.to_string(), d.variance_ratio.to_string(), d.elevated_variance.to_string()]);
            out.verdicts.push(Verdict::new(
                &format!("mu vs nu masses on disk {i}"),
                d.ks.p_value > 0.01,
                format!("KS p = {:.4}, variance ratio {:.3}", d.ks.p_value, d.variance_ratio),
            ));
        }
        out.table("compare.csv", &t, &comments);

        let mut dens = Table::new(&["x", "y", "mu_mean", "nu_mean"]);
        let nodes = &mu[0].density.nodes;
        for (i, p) in nodes.iter().enumerate() {
            let a = mu.iter().map(|m| m.density.values[i]).sum::<f64>() / mu.len() as f64;
            let b = nu.iter().map(|m| m.density.values[i]).sum::<f64>() / nu.len() as f64;
            dens.push([p.x.to_string(), p.y.to_string(), a.to_string(), b.to_string()]);
        }
        out.table("density_mean.csv", &dens, &comments);
        summary.insert("jitter".into(), psi.jitter.into());
        summary.insert("nodes".into(), nodes.len().into());
    }
    out.summary = serde_json::Value::Object(summary);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Kind;

    fn config(extra: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml(&format!(
            "kind = \"gmc\"\nseed = 1\nreplicas = 500\n[model]\nn = 4096\nbeta = 2.0\nensemble = \"pure-quadratic\"\n[sample]\nmethod = \"ginibre\"\n[gmc]\ngamma = 1.0\nk = 3\n{extra}"
        ))
        .unwrap()
    }

    #[test]
    fn defaults_match_the_reference_setup() {
        let s = section(&config("psi_replicas = 500")).unwrap();
        assert_eq!(s.grid_radius, 0.6);
        assert_eq!(grid(&s).unwrap().spacing, ell(3) / 2.0);
        assert_eq!(s.disks.len(), 2);
        assert_eq!(config("").kind, Kind::Gmc);
    }

    #[test]
    fn validation_rejects_thin_or_unresolved_setups() {
        assert!(validate(&config("psi_replicas = 500")).is_ok());
        assert!(matches!(validate(&config("psi_replicas = 100")), Err(RunnerError::ConfigInvalid(_))));
        let mut small = config("psi_replicas = 500");
        small.model.as_mut().unwrap().n = 256;
        assert!(matches!(validate(&small), Err(RunnerError::Core(plasma2d_core::Error::ScaleTooSmall { .. }))));
        let bad_slope = config("[gmc.slope]\nn = 4096\nks = [1]\nreplicas = 100");
        assert!(validate(&bad_slope).is_err());
    }
}
