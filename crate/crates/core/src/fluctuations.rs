//! Linear statistics, exponential moments, CLT checks and the brute-force
//! Laplace-transform probe at one or two particles.

use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, OnceLock};

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Configuration, Point};
use crate::model::{h0, h0_r, zeta, Density, PlanarFn, Shape};
use crate::potential::{bump, bump_mass, mollified_log, smoothed_background, CenterSpec};
use crate::profile::{log_spaced_radii, RadialProfile, Tail, PROFILE_NODES};
use crate::quadrature::{adaptive_piecewise, disk_integral, radial_integral};
use crate::rng::{child_seed, rng_from_seed};
use crate::stats::{anderson_darling_normal, summarize, variance_stderr, AdResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Smoothness {
    Lipschitz,
    C2,
    C3,
    Smooth,
}

type RadialRule = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type PlanarRule = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
type GradRule = Arc<dyn Fn(Point) -> Point + Send + Sync>;

/// A test function φ with optional gradient and Laplacian rules.
///
/// `support` is a radius about the origin outside which ∇φ vanishes, or at
/// least beyond which nothing is integrated (φ is only ever integrated
/// against measures on D(0, support)).
#[derive(Clone)]
pub struct TestFunction {
    pub name: String,
    eval: PlanarRule,
    radial: Option<(RadialRule, Option<RadialRule>)>,
    grad: Option<GradRule>,
    laplacian: Option<PlanarFn>,
    pub support: f64,
    pub breaks: Vec<f64>,
    pub smoothness: Smoothness,
    m0_mean: Arc<OnceLock<f64>>,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("name", &self.name)
            .field("radial", &self.radial.is_some())
            .field("gradient", &self.grad.is_some())
            .field("support", &self.support)
            .finish()
    }
}

impl TestFunction {
    /// Radial φ(|x|) with optional derivative φ'(r).
    pub fn radial(
        name: &str,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: Option<RadialRule>,
        support: f64,
        breaks: Vec<f64>,
        smoothness: Smoothness,
    ) -> Self {
        let f: RadialRule = Arc::new(f);
        let fe = f.clone();
        let grad = df.clone().map(|d| -> GradRule {
            Arc::new(move |p: Point| {
                let r = p.norm();
                if r == 0.0 {
                    Point::ORIGIN
                } else {
                    p * (d(r) / r)
                }
            })
        });
        TestFunction {
            name: name.to_string(),
            eval: Arc::new(move |p: Point| fe(p.norm())),
            radial: Some((f, df)),
            grad,
            laplacian: None,
            support,
            breaks,
            smoothness,
            m0_mean: Arc::new(OnceLock::new()),
        }
    }

    pub fn general(
        name: &str,
        f: impl Fn(Point) -> f64 + Send + Sync + 'static,
        grad: Option<GradRule>,
        support: f64,
        breaks: Vec<f64>,
        smoothness: Smoothness,
    ) -> Self {
        TestFunction {
            name: name.to_string(),
            eval: Arc::new(f),
            radial: None,
            grad,
            laplacian: None,
            support,
            breaks,
            smoothness,
            m0_mean: Arc::new(OnceLock::new()),
        }
    }

    pub fn with_laplacian(mut self, laplacian: PlanarFn) -> Self {
        self.laplacian = Some(laplacian);
        self
    }

    fn with_m0_mean(self, mean: f64) -> Self {
        let _ = self.m0_mean.set(mean);
        self
    }

    pub fn constant(c: f64) -> Self {
        TestFunction::radial("constant", move |_| c, Some(Arc::new(|_| 0.0)), 1.0, vec![], Smoothness::Smooth)
            .with_laplacian(PlanarFn::radial(|_| 0.0, 1.0, vec![]))
            .with_m0_mean(c)
    }

    /// 𝔥₀, the log potential of m₀.
    pub fn h0() -> Self {
        TestFunction::radial(
            "h0",
            h0_r,
            Some(Arc::new(|r| if r <= 1.0 { r } else { 1.0 / r })),
            2.0,
            vec![1.0],
            Smoothness::Lipschitz,
        )
        .with_m0_mean(crate::model::H0_MEAN)
    }

    /// (1 − r²/a²)⁴ on D(0, a).
    pub fn radial_bump(a: f64) -> Result<Self> {
        if !(a > 0.0 && a <= 1.0) {
            return Err(Error::InvalidParameter(format!("bump radius must lie in (0, 1], got {a}")));
        }
        let a2 = a * a;
        let f = move |r: f64| {
            let w = (1.0 - r * r / a2).max(0.0);
            w * w * w * w
        };
        let df = move |r: f64| {
            let w = (1.0 - r * r / a2).max(0.0);
            -8.0 * r / a2 * w * w * w
        };
        let lap = move |r: f64| {
            let u = r * r / a2;
            let w = (1.0 - u).max(0.0);
            (-16.0 * w + 48.0 * u) * w * w / a2
        };
        Ok(TestFunction::radial(&format!("bump(a={a})"), f, Some(Arc::new(df)), a, vec![], Smoothness::C3)
            .with_laplacian(PlanarFn::radial(lap, a, vec![]))
            .with_m0_mean(a2 / 5.0))
    }

    /// The centering function g.
    pub fn center_g(center: CenterSpec) -> Self {
        let rc = center.r_chi;
        TestFunction::radial(
            "g",
            move |r| center.g(r),
            Some(Arc::new(move |r| if r == 0.0 { 0.0 } else { bump_mass(r, rc) / r })),
            1.0,
            vec![rc],
            Smoothness::C3,
        )
        .with_laplacian(PlanarFn::radial(move |r| 2.0 * PI * center.chi(r), rc, vec![]))
        .with_m0_mean(center.g_mean())
    }

    /// φ_{z,ε} = ρ_ε ⋆ log_z − g, with Δφ = 2π(ρ_ε(· − z) − χ).
    pub fn phi_ze(z: Point, eps: f64, center: CenterSpec) -> Result<Self> {
        let bg = smoothed_background(eps)?;
        let mean = bg.eval(z.norm()) - center.g_mean();
        let rc = center.r_chi;
        let support = (z.norm() + eps).max(rc);
        let name = format!("phi(z=({}, {}), eps={eps})", z.x, z.y);
        let f = if z == Point::ORIGIN {
            TestFunction::radial(
                &name,
                move |r| mollified_log(r, eps) - center.g(r),
                Some(Arc::new(move |r| {
                    if r == 0.0 {
                        0.0
                    } else {
                        (bump_mass(r, eps) - bump_mass(r, rc)) / r
                    }
                })),
                support,
                vec![eps, rc],
                Smoothness::C3,
            )
            .with_laplacian(PlanarFn::radial(
                move |r| 2.0 * PI * (bump(r, eps) - bump(r, rc)),
                support,
                vec![eps, rc],
            ))
        } else {
            let radial_grad = move |v: Point, scale: f64| {
                let d = v.norm();
                if d == 0.0 {
                    Point::ORIGIN
                } else {
                    v * (bump_mass(d, scale) / (d * d))
                }
            };
            TestFunction::general(
                &name,
                move |x| mollified_log(x.dist(z), eps) - center.g(x.norm()),
                Some(Arc::new(move |x: Point| {
                    let a = radial_grad(x - z, eps);
                    let b = radial_grad(x, rc);
                    Point::new(a.x - b.x, a.y - b.y)
                })),
                support,
                vec![rc],
                Smoothness::C3,
            )
            .with_laplacian(PlanarFn::general(
                move |x| 2.0 * PI * (bump(x.dist(z), eps) - bump(x.norm(), rc)),
                support,
                vec![rc],
            ))
        };
        Ok(f.with_m0_mean(mean))
    }

    #[inline]
    pub fn eval(&self, p: Point) -> f64 {
        (self.eval)(p)
    }

    pub fn gradient(&self, p: Point) -> Option<Point> {
        self.grad.as_ref().map(|g| g(p))
    }

    pub fn laplacian(&self) -> Option<&PlanarFn> {
        self.laplacian.as_ref()
    }

    pub fn is_radial(&self) -> bool {
        self.radial.is_some()
    }

    /// ∫ φ dm₀, from a closed form when one is attached.
    pub fn m0_mean(&self) -> Result<f64> {
        if let Some(v) = self.m0_mean.get() {
            return Ok(*v);
        }
        let v = match &self.radial {
            Some((f, _)) => {
                let breaks = radial_breaks(&self.breaks, 1.0);
                radial_integral(|r| f(r) / PI, &breaks, 1e-12)?
            }
            None => disk_integral(|p| self.eval(p) / PI, Point::ORIGIN, 1.0, &self.breaks, 1e-11)?,
        };
        Ok(*self.m0_mean.get_or_init(|| v))
    }

    /// Largest |∇φ − central difference| over `probes`, relative to
    /// max(1, |∇φ|).
    pub fn gradient_mismatch(&self, probes: &[Point]) -> Result<f64> {
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for &p in probes {
            let g = self.gradient(p).ok_or(Error::MissingGradient)?;
            let dx = (self.eval(p + Point::new(h, 0.0)) - self.eval(p - Point::new(h, 0.0))) / (2.0 * h);
            let dy = (self.eval(p + Point::new(0.0, h)) - self.eval(p - Point::new(0.0, h))) / (2.0 * h);
            let err = ((g.x - dx).powi(2) + (g.y - dy).powi(2)).sqrt() / g.norm().max(1.0);
            worst = worst.max(err);
        }
        Ok(worst)
    }
}

fn radial_breaks(extra: &[f64], r_max: f64) -> Vec<f64> {
    let mut b = vec![0.0, r_max];
    b.extend(extra.iter().copied().filter(|&x| x > 0.0 && x < r_max));
    b.sort_by(f64::total_cmp);
    b.dedup();
    b
}

/// L_N^m(φ) = Σ φ(x_i) − N ∫ φ dm.
pub fn linstat(config: &Configuration, phi: &TestFunction, background: &Density) -> Result<f64> {
    let sum: f64 = config.iter().map(|&p| phi.eval(p)).sum();
    let mean = if background.is_equilibrium() {
        phi.m0_mean()?
    } else {
        let support = background.support_radius();
        match (&phi.radial, &background.planar().shape) {
            (Some((f, _)), Shape::Radial(rho)) => {
                let mut extra = phi.breaks.clone();
                extra.extend(background.planar().breaks.iter().copied());
                radial_integral(|r| f(r) * rho(r), &radial_breaks(&extra, support), 1e-12)?
            }
            _ => disk_integral(
                |p| phi.eval(p) * background.eval(p),
                Point::ORIGIN,
                support,
                &background.planar().breaks,
                1e-10,
            )?,
        }
    };
    Ok(sum - config.len() as f64 * mean)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub value: f64,
    pub stderr: f64,
    pub replicas: usize,
    pub t: f64,
    /// The top 1% of samples carry more than half of the mean.
    pub heavy_tilt: bool,
}

/// Mean of e^{tS} with a jackknife standard error.
pub fn exp_moment(samples: &[f64], t: f64) -> Result<MomentEstimate> {
    if samples.len() < 2 {
        return Err(Error::InsufficientReplicas { needed: 2, got: samples.len() });
    }
    if t == 0.0 {
        return Ok(MomentEstimate { value: 1.0, stderr: 0.0, replicas: samples.len(), t, heavy_tilt: false });
    }
    let w: Vec<f64> = samples.iter().map(|s| (t * s).exp()).collect();
    let summary = summarize(&w);
    let mut sorted = w.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let top = sorted.len().div_ceil(100);
    let total: f64 = sorted.iter().sum();
    let top_sum: f64 = sorted[..top].iter().sum();
    Ok(MomentEstimate {
        value: summary.mean,
        stderr: summary.stderr,
        replicas: samples.len(),
        t,
        heavy_tilt: top_sum > 0.5 * total,
    })
}

/// Dirichlet energy of φ on D(0, 1), plus that of the bounded harmonic
/// extension of φ|∂D to the exterior.
pub fn dirichlet_energy(phi: &TestFunction) -> Result<f64> {
    let grad = phi.grad.as_ref().ok_or(Error::MissingGradient)?;
    let inside = match &phi.radial {
        Some((_, Some(df))) => radial_integral(|r| df(r).powi(2), &radial_breaks(&phi.breaks, 1.0), 1e-12)?,
        _ => disk_integral(|p| grad(p).norm_sqr(), Point::ORIGIN, 1.0, &phi.breaks, 1e-10)?,
    };
    if phi.is_radial() {
        return Ok(inside);
    }
    // π Σ n (a_n² + b_n²) from the Fourier series on the circle
    let m = 4096;
    let vals: Vec<f64> = (0..m).map(|k| phi.eval(Point::polar(1.0, 2.0 * PI * k as f64 / m as f64))).collect();
    let mut outside = 0.0;
    for n in 1..=512usize {
        let (mut a, mut b) = (0.0, 0.0);
        for (k, v) in vals.iter().enumerate() {
            let th = 2.0 * PI * (n * k % m) as f64 / m as f64;
            a += v * th.cos();
            b += v * th.sin();
        }
        a *= 2.0 / m as f64;
        b *= 2.0 / m as f64;
        outside += PI * n as f64 * (a * a + b * b);
    }
    Ok(inside + outside)
}

/// (1/(2πβ)) ∫ |∇φ|², with φ replaced outside the unit disk by the bounded
/// harmonic extension of its boundary values.
pub fn clt_variance_target(phi: &TestFunction, beta: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::NonPositiveBeta(beta));
    }
    Ok(dirichlet_energy(phi)? / (2.0 * PI * beta))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CltReport {
    pub replicas: usize,
    pub mean: f64,
    pub mean_stderr: f64,
    pub variance: f64,
    pub variance_stderr: f64,
    pub target_variance: f64,
    pub anderson_darling: Option<AdResult>,
    /// All samples equal.
    pub degenerate: bool,
}

impl CltReport {
    pub fn variance_rel_error(&self) -> f64 {
        (self.variance - self.target_variance).abs() / self.target_variance
    }
}

pub fn clt_report(samples: &[f64], target_variance: f64) -> Result<CltReport> {
    if samples.len() < 8 {
        return Err(Error::InsufficientReplicas { needed: 8, got: samples.len() });
    }
    let s = summarize(samples);
    let degenerate = samples.iter().all(|&x| x == samples[0]);
    Ok(CltReport {
        replicas: samples.len(),
        mean: s.mean,
        mean_stderr: s.stderr,
        variance: s.variance,
        variance_stderr: variance_stderr(samples),
        target_variance,
        anderson_darling: (!degenerate).then(|| anderson_darling_normal(samples)),
        degenerate,
    })
}

/// L_N(φ) over the given configurations, summarized against the CLT target.
pub fn clt_check(phi: &TestFunction, beta: f64, configs: &[Configuration]) -> Result<(Vec<f64>, CltReport)> {
    let target = clt_variance_target(phi, beta)?;
    let m0 = Density::equilibrium();
    let values = configs.iter().map(|c| linstat(c, phi, &m0)).collect::<Result<Vec<_>>>()?;
    let report = clt_report(&values, target)?;
    Ok((values, report))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaplaceProbe {
    pub n: usize,
    pub beta: f64,
    pub t: f64,
    pub lhs: f64,
    pub lhs_stderr: f64,
    pub rhs: f64,
    pub rhs_stderr: f64,
    /// ∫ −φΔφ.
    pub energy: f64,
    pub k_ratio: f64,
    /// |lhs − rhs| / √(stderr_lhs² + stderr_rhs²).
    pub discrepancy: f64,
    /// Largest |Δφ|, as a proxy for |φ|₂ in the admissible range of t.
    pub laplacian_sup: f64,
    pub samples: usize,
}

/// Log potential ∫ log|x − y| dm(y) of a radial signed measure of unit
/// mass, tabulated by Newton's theorem.
fn radial_log_potential(rho: &(dyn Fn(f64) -> f64 + Sync), support: f64, breaks: &[f64]) -> Result<RadialProfile> {
    let radii = log_spaced_radii(support, PROFILE_NODES / 4, 1e-4);
    let b = radial_breaks(breaks, support);
    let mut values = Vec::with_capacity(radii.len());
    for &r in &radii {
        let inner: Vec<f64> = b.iter().copied().filter(|&s| s < r).chain([r]).collect();
        let outer: Vec<f64> = [r].into_iter().chain(b.iter().copied().filter(|&s| s > r)).collect();
        let mass_in = if r > 0.0 { 2.0 * PI * adaptive_piecewise(|s| rho(s) * s, &inner, 1e-15, 1e-14)? } else { 0.0 };
        let tail = 2.0 * PI * adaptive_piecewise(|s| rho(s) * s * s.ln(), &outer, 1e-15, 1e-14)?;
        values.push(if r > 0.0 { mass_in * r.ln() } else { 0.0 } + tail);
    }
    let last = *values.last().expect("nonempty");
    RadialProfile::new(radii, values, Tail::Log { coef: 1.0, offset: last - support.ln() })
}

/// Importance-sampling estimate of ∫ exp(−β(F(X, m) + 2NΣζ) + log_tilt(X)) dX
/// with a centred Gaussian envelope of standard deviation 1/√β per
/// coordinate. Returns (log K, relative stderr) and, for a tilt, the
/// self-normalized tilted mean with its stderr.
struct ImportanceRun {
    log_k: f64,
    rel_stderr: f64,
    tilted_mean: f64,
    tilted_stderr: f64,
}

fn importance_run(
    n: usize,
    beta: f64,
    samples: usize,
    seed: u64,
    log_density: &(dyn Fn(&[Point]) -> f64 + Sync),
    tilt: &(dyn Fn(&[Point]) -> f64 + Sync),
) -> Result<ImportanceRun> {
    const BLOCK: usize = 1 << 15;
    let sigma = 1.0 / beta.sqrt();
    let log_q_norm = -(n as f64) * (2.0 * PI * sigma * sigma).ln();
    let blocks = samples.div_ceil(BLOCK);
    // log weights are shifted by a pilot maximum to stay in range
    let shift = {
        let mut rng = rng_from_seed(child_seed(seed, u64::MAX));
        let mut pts = vec![Point::ORIGIN; n];
        let mut m = f64::NEG_INFINITY;
        for _ in 0..4096 {
            let mut q = 0.0;
            for p in pts.iter_mut() {
                let x: f64 = StandardNormal.sample(&mut rng);
                let y: f64 = StandardNormal.sample(&mut rng);
                *p = Point::new(sigma * x, sigma * y);
                q += p.norm_sqr();
            }
            m = m.max(log_density(&pts) + q / (2.0 * sigma * sigma) - log_q_norm);
        }
        m
    };
    // per block: Σw, Σw², Σw·e, Σw·e², Σw²e, Σw²e²
    let sums: Vec<[f64; 6]> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng_from_seed(child_seed(seed, b as u64));
            let count = BLOCK.min(samples - b * BLOCK);
            let mut pts = vec![Point::ORIGIN; n];
            let mut acc = [0.0; 6];
            for _ in 0..count {
                let mut q = 0.0;
                for p in pts.iter_mut() {
                    let x: f64 = StandardNormal.sample(&mut rng);
                    let y: f64 = StandardNormal.sample(&mut rng);
                    *p = Point::new(sigma * x, sigma * y);
                    q += p.norm_sqr();
                }
                let lw = log_density(&pts) + q / (2.0 * sigma * sigma) - log_q_norm - shift;
                let w = lw.exp();
                let e = tilt(&pts).exp();
                acc[0] += w;
                acc[1] += w * w;
                acc[2] += w * e;
                acc[3] += w * e * e;
                acc[4] += w * w * e;
                acc[5] += w * w * e * e;
            }
            acc
        })
        .collect();
    let mut s = [0.0; 6];
    for a in &sums {
        for i in 0..6 {
            s[i] += a[i];
        }
    }
    let nf = samples as f64;
    let mean_w = s[0] / nf;
    if !(mean_w > 0.0 && mean_w.is_finite()) {
        return Err(Error::EnvelopeMismatch(format!("mean weight {mean_w}")));
    }
    let ess = s[0] * s[0] / s[1];
    if ess < 1e-3 * nf {
        return Err(Error::EnvelopeMismatch(format!("effective sample size {ess:.1} of {samples}")));
    }
    let var_w = (s[1] / nf - mean_w * mean_w).max(0.0);
    let rel_stderr = (var_w / nf).sqrt() / mean_w;
    let r = s[2] / s[0];
    // delta method for the ratio Σwe / Σw
    let num = s[5] - 2.0 * r * s[4] + r * r * s[1];
    let tilted_stderr = num.max(0.0).sqrt() / s[0];
    Ok(ImportanceRun { log_k: mean_w.ln() + shift, rel_stderr, tilted_mean: r, tilted_stderr })
}

/// Checks E[e^{tL_N(φ)}] = exp(t²/(4πβ) ∫ −φΔφ) K(m_s)/K(m₀) at N ≤ 2 by
/// direct integration, with m_s = m₀ + sΔφ and s = −t/(2πNβ).
///
/// m_s may be signed when t is large; both partition functions remain well
/// defined. The left side and each partition function use independent
/// sample streams.
pub fn laplace_identity_probe(n: usize, phi: &TestFunction, t: f64, beta: f64, samples: usize, seed: u64) -> Result<LaplaceProbe> {
    if !(1..=2).contains(&n) {
        return Err(Error::InvalidParameter(format!("laplace probe needs n in {{1, 2}}, got {n}")));
    }
    if !(beta > 0.0) {
        return Err(Error::NonPositiveBeta(beta));
    }
    let lap = phi.laplacian().ok_or(Error::MissingGradient)?;
    let Shape::Radial(lap_r) = &lap.shape else {
        return Err(Error::InvalidParameter("laplace probe needs a radial laplacian".into()));
    };
    if lap.support > 1.0 + 1e-12 {
        return Err(Error::InvalidParameter("laplacian must be supported in the unit disk".into()));
    }
    let mass = lap.integral(1e-12)?;
    if mass.abs() > 1e-8 {
        return Err(Error::MassNotZero(mass));
    }
    let Some((phi_r, _)) = &phi.radial else {
        return Err(Error::InvalidParameter("laplace probe needs a radial test function".into()));
    };
    let mut breaks = lap.breaks.clone();
    breaks.push(lap.support);
    let energy = -radial_integral(|r| phi_r(r) * lap_r(r), &radial_breaks(&breaks, lap.support), 1e-13)?;
    let laplacian_sup = (0..=2000).map(|i| lap_r(lap.support * i as f64 / 2000.0).abs()).fold(0.0, f64::max);

    let nf = n as f64;
    let s = -t / (2.0 * PI * nf * beta);
    let mut m_breaks = breaks.clone();
    m_breaks.push(1.0);
    let lap_c = lap_r.clone();
    let rho_s = move |r: f64| if r <= 1.0 { 1.0 / PI + s * lap_c(r) } else { 0.0 };
    let rho_0 = |r: f64| if r <= 1.0 { 1.0 / PI } else { 0.0 };

    // F(X, m) = Σ_{i<j} −log|x_i − x_j| + N Σ U_m(x_i) + (N²/2) I(m)
    let partition = |rho: &(dyn Fn(f64) -> f64 + Sync), stream: u64| -> Result<ImportanceRun> {
        let u = radial_log_potential(rho, 1.0, &m_breaks)?;
        let self_energy = -radial_integral(|r| u.eval(r) * rho(r), &radial_breaks(&m_breaks, 1.0), 1e-13)?;
        let log_density = |x: &[Point]| {
            let mut f = 0.5 * nf * nf * self_energy;
            for i in 0..x.len() {
                f += nf * u.eval(x[i].norm()) + 2.0 * nf * zeta(x[i]);
                for j in 0..i {
                    f -= 0.5 * x[i].dist_sqr(x[j]).ln();
                }
            }
            -beta * f
        };
        importance_run(n, beta, samples, child_seed(seed, stream), &log_density, &|_| 0.0)
    };

    let mean = phi.m0_mean()?;
    let phi_c = phi_r.clone();
    let lhs_density = |x: &[Point]| {
        let mut f = nf * nf / 8.0;
        for i in 0..x.len() {
            f += nf * (h0(x[i]) + 2.0 * zeta(x[i]));
            for j in 0..i {
                f -= 0.5 * x[i].dist_sqr(x[j]).ln();
            }
        }
        -beta * f
    };
    let tilt = |x: &[Point]| t * (x.iter().map(|p| phi_c(p.norm())).sum::<f64>() - nf * mean);
    let lhs = importance_run(n, beta, samples, child_seed(seed, 0), &lhs_density, &tilt)?;
    // m_s = m₀ exactly when t = 0 or Δφ ≡ 0
    let (k_ratio, k_rel) = if t == 0.0 || laplacian_sup == 0.0 {
        (1.0, 0.0)
    } else {
        let k0 = partition(&rho_0, 1)?;
        let ks = partition(&rho_s, 2)?;
        ((ks.log_k - k0.log_k).exp(), (ks.rel_stderr.powi(2) + k0.rel_stderr.powi(2)).sqrt())
    };
    let rhs = (t * t / (4.0 * PI * beta) * energy).exp() * k_ratio;
    let rhs_stderr = rhs * k_rel;
    let combined = lhs.tilted_stderr.hypot(rhs_stderr);
    Ok(LaplaceProbe {
        n,
        beta,
        t,
        lhs: lhs.tilted_mean,
        lhs_stderr: lhs.tilted_stderr,
        rhs,
        rhs_stderr,
        energy,
        k_ratio,
        discrepancy: if combined > 0.0 { (lhs.tilted_mean - rhs).abs() / combined } else { 0.0 },
        laplacian_sup,
        samples,
    })
}
