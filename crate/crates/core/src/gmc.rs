//! Regularized chaos measures of the plasma, the reference log-correlated
//! Gaussian field Ψ, and their comparison.
//!
//! Scales are indexed by k with ℓ(k) = e^{−k}. The covariance of Ψ_k(x) and
//! Ψ_n(z) is
//!
//! C(x, z) = −Λ(|x − z|; ℓ(k), ℓ(n)) + Λ(|x|; ℓ(k), r_χ) + Λ(|z|; ℓ(n), r_χ) + c
//!
//! with Λ(d; a, b) = ((ρ_a ⋆ ρ_b) ⋆ log)(d), c = −Λ(0; r_χ, r_χ) = −∫χg.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fluctuations::exp_moment;
use crate::geometry::{Configuration, Point};
use crate::linalg::cholesky_lower;
use crate::potential::{bump, mollified_log, pot_field, pot_reg, smoothed_background, CenterSpec, GridSpec, ScalarField};
use crate::profile::{uniform_radii, RadialProfile, Tail};
use crate::quadrature::{gl, gl_piecewise};
use crate::rng::{child_seed, rng_from_seed};
use crate::stats::{ks_two_sample, summarize, KsResult};

/// ℓ(k) = e^{−k}.
pub fn ell(k: u32) -> f64 {
    (-(k as f64)).exp()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    Empirical,
    GaussianPredicted,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChaosParams {
    pub gamma: f64,
    pub k: u32,
    pub normalization: Normalization,
}

impl ChaosParams {
    pub fn new(gamma: f64, k: u32, normalization: Normalization) -> Result<Self> {
        if !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!("gamma must be finite, got {gamma}")));
        }
        Ok(ChaosParams { gamma, k, normalization })
    }

    pub fn ell(&self) -> f64 {
        ell(self.k)
    }
}

const GL_ORDER: usize = 32;
const PROFILE_POINTS: usize = 1025;

/// Λ(d; a, b) = ((ρ_a ⋆ ρ_b) ⋆ log)(d) by piecewise Gauss-Legendre over the
/// support of ρ_a, using the closed form of ρ_b ⋆ log. Exactly log d once
/// d ≥ a + b.
pub fn conv_log(d: f64, a: f64, b: f64) -> f64 {
    if d >= a + b {
        return d.ln();
    }
    // integrate over the narrower kernel
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    // angular mean of (ρ_b ⋆ log)(|d e₁ + s e^{iθ}|)
    let ring = |s: f64| -> f64 {
        if d == 0.0 || s == 0.0 {
            return mollified_log(d.max(s), b);
        }
        let c = (b * b - d * d - s * s) / (2.0 * d * s);
        let mut breaks = vec![0.0];
        if c > -1.0 && c < 1.0 {
            breaks.push(c.acos());
        }
        breaks.push(PI);
        gl_piecewise(GL_ORDER, &breaks, |t| mollified_log((d * d + s * s + 2.0 * d * s * t.cos()).max(0.0).sqrt(), b)) / PI
    };
    let mut breaks = vec![0.0, a];
    for s in [(d - b).abs(), d + b] {
        if s > 0.0 && s < a {
            breaks.push(s);
        }
    }
    breaks.sort_by(f64::total_cmp);
    gl_piecewise(GL_ORDER, &breaks, |s| 2.0 * PI * s * bump(s, a) * ring(s))
}

/// One term of the covariance double integral, ∬ ρ_{p,a}(u) ρ_{q,b}(v) log|u − v|,
/// by polar quadrature in u and, in v, the circle-mean identity
/// (1/2π)∮ log|w − t e^{iθ}| dθ = log max(|w|, t).
fn log_pair_direct(p: Point, a: f64, q: Point, b: f64) -> f64 {
    let angles = 256;
    let mut total = 0.0;
    let outer = |s: f64| -> f64 {
        let mut acc = 0.0;
        for j in 0..angles {
            let th = 2.0 * PI * (j as f64 + 0.5) / angles as f64;
            let u = Point::new(p.x + s * th.cos(), p.y + s * th.sin());
            let w = u.dist(q);
            let mut br = vec![0.0, b];
            if w > 0.0 && w < b {
                br.insert(1, w);
            }
            acc += gl_piecewise(20, &br, |t| 2.0 * PI * t * bump(t, b) * w.max(t).ln());
        }
        acc / angles as f64
    };
    total += gl(48, 0.0, a, |s| 2.0 * PI * s * bump(s, a) * outer(s));
    total
}

/// Covariance of Ψ_k(x) and Ψ_n(z) by direct quadrature of
/// ∬ (ρ_{x,ℓ(k)} − χ)(u) (ρ_{z,ℓ(n)} − χ)(v) log|u − v|⁻¹, independent of the
/// cached profiles.
pub fn psi_cov_direct(x: Point, z: Point, k: u32, n: u32, center: &CenterSpec) -> f64 {
    let (a, b, r) = (ell(k), ell(n), center.r_chi);
    let o = Point::ORIGIN;
    -(log_pair_direct(x, a, z, b) - log_pair_direct(x, a, o, r) - log_pair_direct(o, r, z, b) + log_pair_direct(o, r, o, r))
}

/// Cached Λ profiles for a fixed χ.
#[derive(Debug)]
pub struct CovarianceModel {
    pub center: CenterSpec,
    /// c = −∫χg
    pub c: f64,
    profiles: Mutex<HashMap<(u64, u64), Arc<RadialProfile>>>,
}

impl CovarianceModel {
    pub fn new(center: CenterSpec) -> Self {
        let r = center.r_chi;
        CovarianceModel { center, c: -conv_log(0.0, r, r), profiles: Mutex::new(HashMap::new()) }
    }

    fn profile(&self, a: f64, b: f64) -> Arc<RadialProfile> {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        let key = (a.to_bits(), b.to_bits());
        if let Some(p) = self.profiles.lock().expect("profile cache poisoned").get(&key) {
            return p.clone();
        }
        let radii = uniform_radii(0.0, a + b, PROFILE_POINTS);
        let values: Vec<f64> = radii.par_iter().map(|&d| conv_log(d, a, b)).collect();
        let prof = Arc::new(RadialProfile::new(radii, values, Tail::Log { coef: 1.0, offset: 0.0 }).expect("profile tabulates"));
        self.profiles.lock().expect("profile cache poisoned").entry(key).or_insert(prof).clone()
    }

    /// Λ(d; a, b) from the cache.
    pub fn lambda(&self, d: f64, a: f64, b: f64) -> f64 {
        if d >= a + b {
            return d.ln();
        }
        self.profile(a, b).eval(d)
    }

    /// (ρ_{ℓ(k)} ⋆ g)(|x|).
    pub fn smoothed_g(&self, r: f64, k: u32) -> f64 {
        self.lambda(r, ell(k), self.center.r_chi)
    }

    /// E[Ψ_k(x) Ψ_n(z)].
    pub fn psi_cov(&self, x: Point, z: Point, k: u32, n: u32) -> f64 {
        -self.lambda(x.dist(z), ell(k), ell(n)) + self.smoothed_g(x.norm(), k) + self.smoothed_g(z.norm(), n) + self.c
    }

    /// The unsmoothed kernel −log|x − z| + g(x) + g(z) + c.
    pub fn kernel(&self, x: Point, z: Point) -> f64 {
        -x.dist(z).ln() + self.center.g(x.norm()) + self.center.g(z.norm()) + self.c
    }
}

fn check_scale(k: u32, n: usize) -> Result<f64> {
    let l = ell(k);
    let micro = l * (n as f64).sqrt();
    if micro < 2.0 {
        return Err(Error::ScaleTooSmall { scale: l, reason: format!("l(k) sqrt(N) = {micro:.3} < 2") });
    }
    Ok(l)
}

/// Φ_k = √β (Pot_{N,ℓ(k)} − L_N(g)) on the grid.
pub fn phi_k_field(config: &Configuration, k: u32, grid: GridSpec, beta: f64, center: &CenterSpec) -> Result<ScalarField> {
    let l = check_scale(k, config.len())?;
    let mut field = pot_field(config, l, grid)?;
    let lg = center.linstat_g(config);
    let sb = beta.sqrt();
    for v in &mut field.values {
        *v = sb * (*v - lg);
    }
    Ok(field)
}

/// Φ_k at a single point.
pub fn phi_k_at(config: &Configuration, z: Point, k: u32, beta: f64, center: &CenterSpec) -> Result<f64> {
    let l = check_scale(k, config.len())?;
    Ok(beta.sqrt() * (pot_reg(config, z, l)? - center.linstat_g(config)))
}

/// Φ_k(0) from the particle moduli alone.
pub fn phi_k_origin(moduli: &[f64], k: u32, beta: f64, center: &CenterSpec) -> Result<f64> {
    let n = moduli.len();
    let l = check_scale(k, n)?;
    let bg = smoothed_background(l)?.eval(0.0);
    let s: f64 = moduli.iter().map(|&r| mollified_log(r, l) - center.g(r)).sum();
    Ok(beta.sqrt() * (s - n as f64 * (bg - center.g_mean())))
}

/// Per-node log E e^{γΦ}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mode: Normalization,
    pub gamma: f64,
    pub log_mean: Vec<f64>,
    pub replicas: Option<usize>,
}

pub const MIN_NORMALIZER_REPLICAS: usize = 500;

/// log of the mean of e^{x}, computed stably.
pub fn log_mean_exp(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + (v.iter().map(|x| (x - m).exp()).sum::<f64>() / v.len() as f64).ln()
}

/// Monte Carlo normalizer over replicas of one field.
pub fn empirical_normalizer(fields: &[ScalarField], gamma: f64) -> Result<Normalizer> {
    if fields.len() < MIN_NORMALIZER_REPLICAS {
        return Err(Error::InsufficientReplicas { needed: MIN_NORMALIZER_REPLICAS, got: fields.len() });
    }
    let m = fields[0].len();
    if fields.iter().any(|f| f.len() != m) {
        return Err(Error::InvalidParameter("fields must share a grid".into()));
    }
    let log_mean = (0..m).map(|i| log_mean_exp(fields.iter().map(|f| gamma * f.values[i]))).collect();
    Ok(Normalizer { mode: Normalization::Empirical, gamma, log_mean, replicas: Some(fields.len()) })
}

/// γ² C_k(z, z) / 2 at each node.
pub fn gaussian_normalizer(nodes: &[Point], k: u32, gamma: f64, model: &CovarianceModel) -> Normalizer {
    let log_mean = nodes.iter().map(|&p| 0.5 * gamma * gamma * model.psi_cov(p, p, k, k)).collect();
    Normalizer { mode: Normalization::GaussianPredicted, gamma, log_mean, replicas: None }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChaosDensity {
    pub params: ChaosParams,
    pub density: ScalarField,
}

impl ChaosDensity {
    /// Riemann-sum mass of D(center, radius).
    pub fn mass(&self, center: Point, radius: f64) -> f64 {
        let a = self.density.grid.cell_area();
        self.density
            .nodes
            .iter()
            .zip(&self.density.values)
            .filter(|(p, _)| p.dist(center) <= radius)
            .map(|(_, v)| v * a)
            .sum()
    }
}

/// e^{γΦ_k} / E e^{γΦ_k} on the grid.
pub fn chaos_measure(field: &ScalarField, params: ChaosParams, normalizer: &Normalizer) -> Result<ChaosDensity> {
    if normalizer.mode != params.normalization || normalizer.gamma != params.gamma {
        return Err(Error::InvalidParameter("normalizer does not match the chaos parameters".into()));
    }
    if normalizer.log_mean.len() != field.len() {
        return Err(Error::InvalidParameter("normalizer and field sizes differ".into()));
    }
    let values = field
        .values
        .iter()
        .zip(&normalizer.log_mean)
        .map(|(v, lm)| if params.gamma == 0.0 { 1.0 } else { (params.gamma * v - lm).exp() })
        .collect();
    Ok(ChaosDensity { params, density: ScalarField { values, ..field.clone() } })
}

pub const MAX_DENSE_NODES: usize = 8192;

/// Replicas of Ψ_k on the grid and the diagonal jitter that was needed.
#[derive(Clone, Debug)]
pub struct PsiSamples {
    pub fields: Vec<ScalarField>,
    pub jitter: f64,
}

/// Lower Cholesky factor of the covariance of Ψ_k at `nodes`.
pub fn psi_factor(nodes: &[Point], k: u32, model: &CovarianceModel) -> Result<(Vec<f64>, f64)> {
    let m = nodes.len();
    if m > MAX_DENSE_NODES {
        return Err(Error::InvalidParameter(format!("{m} nodes exceed the dense budget of {MAX_DENSE_NODES}")));
    }
    let mut cov = vec![0.0; m * m];
    cov.par_chunks_mut(m).enumerate().for_each(|(j, col)| {
        for (i, c) in col.iter_mut().enumerate() {
            *c = model.psi_cov(nodes[i], nodes[j], k, k);
        }
    });
    let mut jitter = 1e-12;
    loop {
        let mut a = cov.clone();
        for i in 0..m {
            a[i + i * m] += jitter;
        }
        if cholesky_lower(&mut a, m).is_ok() {
            return Ok((a, jitter));
        }
        jitter *= 10.0;
        if jitter > 1e-8 * 1.000_001 {
            return Err(Error::NotPsd(1e-8));
        }
    }
}

/// Mean-zero Gaussian fields with covariance C_k on the grid nodes. Replica
/// r uses child seed r of `seed`.
pub fn sample_psi(grid: GridSpec, k: u32, model: &CovarianceModel, seed: u64, replicas: usize) -> Result<PsiSamples> {
    let nodes = grid.nodes();
    let m = nodes.len();
    let (l, jitter) = psi_factor(&nodes, k, model)?;
    let fields = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_from_seed(child_seed(seed, r as u64));
            let xi: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
            let mut values = vec![0.0; m];
            for (j, &x) in xi.iter().enumerate() {
                let col = &l[j * m..(j + 1) * m];
                for i in j..m {
                    values[i] += col[i] * x;
                }
            }
            ScalarField { grid, nodes: nodes.clone(), values }
        })
        .collect();
    Ok(PsiSamples { fields, jitter })
}

/// e^{γΨ_k} / E e^{γΨ_k} for each replica, normalized exactly.
pub fn nu_measure(fields: &[ScalarField], gamma: f64, k: u32, model: &CovarianceModel) -> Result<Vec<ChaosDensity>> {
    let Some(first) = fields.first() else { return Ok(Vec::new()) };
    let params = ChaosParams::new(gamma, k, Normalization::GaussianPredicted)?;
    let norm = gaussian_normalizer(&first.nodes, k, gamma, model);
    fields.iter().map(|f| chaos_measure(f, params, &norm)).collect()
}

/// One term γ_i Φ_{k_i}(x_i) of a joint exponential moment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentPoint {
    pub x: Point,
    pub k: u32,
    pub gamma: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentProbe {
    pub lhs: f64,
    pub lhs_stderr: f64,
    pub rhs: f64,
    /// log lhs − log rhs
    pub dlog: f64,
    pub dlog_stderr: f64,
    pub z_score: f64,
    pub replicas: usize,
}

impl MomentProbe {
    /// |Δlog| ≤ max(0.2, 3 stderr).
    pub fn pass(&self) -> bool {
        self.dlog.abs() <= (3.0 * self.dlog_stderr).max(0.2)
    }
}

/// E exp(Σ γ_i Φ_{k_i}(x_i)) over plasma replicas against the Gaussian
/// closed form exp(½ ΣΣ γ_a γ_b C(x_a, x_b; k_a, k_b)).
pub fn moment_identity_probe(points: &[MomentPoint], configs: &[Configuration], beta: f64, model: &CovarianceModel) -> Result<MomentProbe> {
    if points.is_empty() || points.len() > 3 {
        return Err(Error::InvalidParameter("moment probes take 1 to 3 points".into()));
    }
    for p in points {
        if p.x.norm() >= 0.8 {
            return Err(Error::InvalidParameter(format!("probe point {:?} outside D(0, 0.8)", p.x)));
        }
    }
    let n = configs.first().map_or(0, |c| c.len());
    for p in points {
        check_scale(p.k, n)?;
    }
    let sums = configs
        .par_iter()
        .map(|c| points.iter().map(|p| Ok(p.gamma * phi_k_at(c, p.x, p.k, beta, &model.center)?)).sum::<Result<f64>>())
        .collect::<Result<Vec<f64>>>()?;
    let est = exp_moment(&sums, 1.0)?;
    if est.heavy_tilt {
        return Err(Error::HeavyTiltUntrusted);
    }
    let mut var = 0.0;
    for a in points {
        for b in points {
            var += a.gamma * b.gamma * model.psi_cov(a.x, b.x, a.k, b.k);
        }
    }
    let rhs = (0.5 * var).exp();
    let dlog = est.value.ln() - 0.5 * var;
    let dlog_stderr = est.stderr / est.value;
    let z_score = if dlog_stderr > 0.0 { dlog / dlog_stderr } else { 0.0 };
    Ok(MomentProbe { lhs: est.value, lhs_stderr: est.stderr, rhs, dlog, dlog_stderr, z_score, replicas: configs.len() })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestDisk {
    pub center: Point,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiskComparison {
    pub disk: TestDisk,
    pub ks: KsResult,
    pub mu_mean: f64,
    pub mu_variance: f64,
    pub nu_mean: f64,
    pub nu_variance: f64,
    /// Var μ / Var ν
    pub variance_ratio: f64,
    pub elevated_variance: bool,
    pub mu_masses: Vec<f64>,
    pub nu_masses: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmcReport {
    pub gamma: f64,
    pub k: u32,
    pub mu_replicas: usize,
    pub nu_replicas: usize,
    pub disks: Vec<DiskComparison>,
}

pub const MIN_COMPARE_REPLICAS: usize = 500;

/// Two-sample comparison of disk masses under μ_k^γ and ν_k^γ.
pub fn gmc_compare(mu: &[ChaosDensity], nu: &[ChaosDensity], disks: &[TestDisk]) -> Result<GmcReport> {
    for side in [mu, nu] {
        if side.len() < MIN_COMPARE_REPLICAS {
            return Err(Error::InsufficientReplicas { needed: MIN_COMPARE_REPLICAS, got: side.len() });
        }
    }
    let (p, q) = (mu[0].params, nu[0].params);
    if p.k != q.k || p.gamma != q.gamma || mu[0].density.grid != nu[0].density.grid {
        return Err(Error::InvalidParameter("compared measures must share grid, k and gamma".into()));
    }
    let disks = disks
        .iter()
        .map(|&disk| {
            let mu_masses: Vec<f64> = mu.iter().map(|m| m.mass(disk.center, disk.radius)).collect();
            let nu_masses: Vec<f64> = nu.iter().map(|m| m.mass(disk.center, disk.radius)).collect();
            let (a, b) = (summarize(&mu_masses), summarize(&nu_masses));
            let ratio = a.variance / b.variance;
            DiskComparison {
                disk,
                ks: ks_two_sample(&mu_masses, &nu_masses),
                mu_mean: a.mean,
                mu_variance: a.variance,
                nu_mean: b.mean,
                nu_variance: b.variance,
                variance_ratio: ratio,
                elevated_variance: !(ratio <= 1.5),
                mu_masses,
                nu_masses,
            }
        })
        .collect();
    Ok(GmcReport { gamma: p.gamma, k: p.k, mu_replicas: mu.len(), nu_replicas: nu.len(), disks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fluctuations::{linstat, TestFunction};
    use crate::model::Density;
    use crate::sampler::ginibre_sample;

    fn model() -> CovarianceModel {
        CovarianceModel::new(CenterSpec::default())
    }

    #[test]
    fn conv_log_limits() {
        // Newton outside the joint support, and the single-kernel closed form as b → 0
        assert_eq!(conv_log(0.5, 0.2, 0.1), 0.5f64.ln());
        let a = 0.3;
        for d in [0.0, 0.1, 0.25] {
            let v = conv_log(d, 1e-9, a);
            assert!((v - mollified_log(d, a)).abs() < 1e-7, "{d}: {v}");
        }
        // symmetric in the two scales
        assert!((conv_log(0.07, 0.05, 0.08) - conv_log(0.07, 0.08, 0.05)).abs() < 1e-12);
        // continuous at the support edge
        assert!((conv_log(0.3 - 1e-9, 0.2, 0.1) - 0.3f64.ln()).abs() < 1e-8);
    }

    #[test]
    fn psi_cov_symmetry_and_reconstruction() {
        let m = model();
        let x = Point::new(0.7, 0.0);
        let z = Point::new(-0.3, 0.0);
        assert!((m.psi_cov(x, z, 2, 5) - m.psi_cov(z, x, 5, 2)).abs() < 1e-12);
        // far apart and clear of χ: the bare kernel
        let x = Point::polar(0.7, 0.3);
        let z = Point::polar(0.7, 0.3 + PI / 2.0);
        assert!((m.psi_cov(x, z, 5, 5) - m.kernel(x, z)).abs() < 1e-8);
        // unit separation on the circle of radius 0.7
        let half = (0.5f64 / 0.7).asin();
        let (x, z) = (Point::polar(0.7, half), Point::polar(0.7, -half));
        assert!((x.dist(z) - 1.0).abs() < 1e-14);
        assert!((m.psi_cov(x, z, 5, 5) - (2.0 * 0.7f64.ln() + m.c)).abs() < 1e-12);
    }

    #[test]
    fn self_covariance_grows_like_k() {
        let m = model();
        let x = Point::new(0.3, 0.0);
        for k in 1..=5 {
            let v = m.psi_cov(x, x, k, k);
            assert!((v - k as f64).abs() <= 2.0, "k={k}: {v}");
        }
    }

    #[test]
    fn profile_route_matches_direct_quadrature() {
        let m = model();
        for (x, z, k, n) in [
            (Point::new(0.1, 0.05), Point::new(0.12, 0.0), 2, 3),
            (Point::new(0.4, -0.2), Point::new(0.0, 0.3), 1, 1),
        ] {
            let a = m.psi_cov(x, z, k, n);
            let b = psi_cov_direct(x, z, k, n, &m.center);
            assert!((a - b).abs() < 1e-4, "{a} vs {b}");
        }
    }

    #[test]
    fn phi_k_paths_agree() {
        let cfg = ginibre_sample(256, 3).unwrap();
        let c = CenterSpec::default();
        let k = 2;
        let grid = GridSpec::new(0.3, ell(k) / 2.0).unwrap();
        let f = phi_k_field(&cfg, k, grid, 2.0, &c).unwrap();
        let z = f.nodes[f.len() / 3];
        let phi = TestFunction::phi_ze(z, ell(k), c).unwrap();
        let direct = 2f64.sqrt() * linstat(&cfg, &phi, &Density::equilibrium()).unwrap();
        assert!((f.values[f.len() / 3] - direct).abs() < 1e-10);
        let origin = phi_k_at(&cfg, Point::ORIGIN, k, 2.0, &c).unwrap();
        let moduli: Vec<f64> = cfg.iter().map(|p| p.norm()).collect();
        assert!((phi_k_origin(&moduli, k, 2.0, &c).unwrap() - origin).abs() < 1e-10);
        assert!(matches!(phi_k_field(&cfg, 4, grid, 2.0, &c), Err(Error::ScaleTooSmall { .. })));
    }

    #[test]
    fn zero_gamma_gives_unit_density() {
        let m = model();
        let grid = GridSpec::new(0.3, 0.1).unwrap();
        let s = sample_psi(grid, 1, &m, 5, 3).unwrap();
        let nu = nu_measure(&s.fields, 0.0, 1, &m).unwrap();
        assert!(nu.iter().all(|d| d.density.values.iter().all(|&v| v == 1.0)));
    }

    #[test]
    fn psi_samples_are_reproducible_with_the_right_variance() {
        let m = model();
        let grid = GridSpec::new(0.3, 0.1).unwrap();
        let a = sample_psi(grid, 1, &m, 1, 2000).unwrap();
        let b = sample_psi(grid, 1, &m, 1, 4).unwrap();
        assert_eq!(a.fields[3].values, b.fields[3].values);
        assert!(a.jitter <= 1e-8);
        for (i, &p) in a.fields[0].nodes.iter().enumerate() {
            let xs: Vec<f64> = a.fields.iter().map(|f| f.values[i]).collect();
            let v = summarize(&xs).variance;
            let t = m.psi_cov(p, p, 1, 1);
            assert!((v / t - 1.0).abs() < 0.1, "{v} vs {t}");
        }
    }

    #[test]
    fn moment_probe_trivial_at_zero_gamma() {
        let m = model();
        let configs: Vec<Configuration> = (0..4).map(|s| ginibre_sample(64, s).unwrap()).collect();
        let p = MomentPoint { x: Point::ORIGIN, k: 1, gamma: 0.0 };
        let r = moment_identity_probe(&[p], &configs, 2.0, &m).unwrap();
        assert_eq!((r.lhs, r.rhs, r.dlog), (1.0, 1.0, 0.0));
        assert!(r.pass());
    }
}
