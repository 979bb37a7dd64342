//! Electrostatic potential of a configuration, its mollified version, the
//! centering function g and the centered test functions φ_{z,ε}.
//!
//! Every smoothing kernel here is the same radial bump ρ(x) = (4/π)(1 − |x|²)³
//! at some scale, so convolutions with log reduce to closed forms by Newton's
//! theorem, except for the smoothed background near the unit circle.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Configuration, Point};
use crate::model::{h0, h0_r, zeta_r};
use crate::profile::{uniform_radii, RadialProfile, Tail};
use crate::quadrature::{adaptive_piecewise, gl};

/// Normalizing constant of the unit bump.
pub const BUMP_NORM: f64 = 4.0 / PI;

/// ∫ log|y| ρ(y) dy for the unit bump.
pub const BUMP_LOG_MEAN: f64 = -25.0 / 24.0;

/// ∫ |y|² ρ(y) dy for the unit bump.
pub const BUMP_SECOND_MOMENT: f64 = 0.2;

/// ρ_ε at radius `r`.
#[inline]
pub fn bump(r: f64, eps: f64) -> f64 {
    let u = r / eps;
    if u >= 1.0 {
        0.0
    } else {
        let w = 1.0 - u * u;
        BUMP_NORM * w * w * w / (eps * eps)
    }
}

/// ρ_ε-mass of D(0, r).
#[inline]
pub fn bump_mass(r: f64, eps: f64) -> f64 {
    let u = r / eps;
    if u >= 1.0 {
        1.0
    } else {
        let w = 1.0 - u * u;
        1.0 - w * w * w * w
    }
}

/// (ρ_ε ⋆ log)(w) at |w| = `dist`.
///
/// Inside the support, log ε + Q(d²/ε²) with Q the antiderivative form of
/// M(r) log r + 2π∫_r^ε log(s) ρ_ε(s) s ds.
#[inline]
pub fn mollified_log(dist: f64, eps: f64) -> f64 {
    if dist >= eps {
        return dist.ln();
    }
    let b = (dist / eps) * (dist / eps);
    eps.ln() + BUMP_LOG_MEAN + b * (2.0 + b * (-1.5 + b * (2.0 / 3.0 - b / 8.0)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MollifierSpec {
    pub epsilon: f64,
}

impl MollifierSpec {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!("smoothing radius must be positive, got {epsilon}")));
        }
        Ok(MollifierSpec { epsilon })
    }

    pub fn density(&self, r: f64) -> f64 {
        bump(r, self.epsilon)
    }

    pub fn log_conv(&self, dist: f64) -> f64 {
        mollified_log(dist, self.epsilon)
    }
}

/// χ, the bump at scale `r_chi`, and g = log ⋆ χ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CenterSpec {
    pub r_chi: f64,
}

impl Default for CenterSpec {
    fn default() -> Self {
        CenterSpec { r_chi: 0.5 }
    }
}

impl CenterSpec {
    pub fn new(r_chi: f64) -> Result<Self> {
        if !(r_chi > 0.0 && r_chi < 1.0) {
            return Err(Error::InvalidParameter(format!("r_chi must lie in (0, 1), got {r_chi}")));
        }
        Ok(CenterSpec { r_chi })
    }

    pub fn chi(&self, r: f64) -> f64 {
        bump(r, self.r_chi)
    }

    pub fn g(&self, r: f64) -> f64 {
        mollified_log(r, self.r_chi)
    }

    /// ∫ g dm₀.
    pub fn g_mean(&self) -> f64 {
        -0.5 + self.r_chi * self.r_chi * BUMP_SECOND_MOMENT / 2.0
    }

    /// L_N(g) with respect to m₀.
    pub fn linstat_g(&self, config: &Configuration) -> f64 {
        let s: f64 = config.iter().map(|p| self.g(p.norm())).sum();
        s - config.len() as f64 * self.g_mean()
    }
}

pub fn center_g(dist: f64, center: &CenterSpec) -> f64 {
    center.g(dist)
}

/// (m₀ ⋆ ρ_ε ⋆ log) as a function of the radius.
#[derive(Debug)]
pub struct SmoothedBackground {
    eps: f64,
    annulus: RadialProfile,
}

const ANNULUS_NODES: usize = 401;

impl SmoothedBackground {
    pub fn new(eps: f64) -> Result<Self> {
        MollifierSpec::new(eps)?;
        let lo = (1.0 - eps).max(0.0);
        let hi = 1.0 + eps;
        let radii = uniform_radii(lo, hi, ANNULUS_NODES);
        let mut values = Vec::with_capacity(radii.len());
        for &r in &radii {
            values.push(Self::annulus_value(r, eps)?);
        }
        // the last node is exterior, where the value is exactly log r
        *values.last_mut().expect("nonempty") = hi.ln();
        let annulus = RadialProfile::new(radii, values, Tail::Log { coef: 1.0, offset: 0.0 })?;
        Ok(SmoothedBackground { eps, annulus })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// (r² − 1)/2 + E|y|²/2 − (ρ_ε ⋆ ζ)(r): the quadratic part of 𝔥₀ smooths
    /// exactly, the confinement only contributes near the circle.
    fn annulus_value(r: f64, eps: f64) -> Result<f64> {
        let base = 0.5 * (r * r - 1.0) + 0.5 * BUMP_SECOND_MOMENT * eps * eps;
        let s_lo = 1.0f64.max(r - eps);
        let s_hi = r + eps;
        if s_hi <= 1.0 {
            return Ok(base);
        }
        let mut breaks = vec![s_lo, s_hi];
        // the angular window closes into a full circle at s = ε − r
        let kink = eps - r;
        if kink > s_lo && kink < s_hi {
            breaks.insert(1, kink);
        }
        let conv = adaptive_piecewise(|s| zeta_r(s) * s * angular_bump(s, r, eps), &breaks, 1e-14, 1e-13)?;
        Ok(base - conv)
    }

    pub fn eval(&self, r: f64) -> f64 {
        if r <= 1.0 - self.eps {
            0.5 * (r * r - 1.0) + 0.5 * BUMP_SECOND_MOMENT * self.eps * self.eps
        } else if r >= 1.0 + self.eps {
            r.ln()
        } else {
            self.annulus.eval(r)
        }
    }
}

/// ∫_0^{2π} ρ_ε(|s e^{iθ} − r|) dθ.
fn angular_bump(s: f64, r: f64, eps: f64) -> f64 {
    if s == 0.0 || r == 0.0 {
        return 2.0 * PI * bump(s.max(r), eps);
    }
    let c = (s * s + r * r - eps * eps) / (2.0 * s * r);
    if c >= 1.0 {
        return 0.0;
    }
    let theta0 = if c <= -1.0 { PI } else { c.acos() };
    let e2 = eps * eps;
    let ds = (s - r) * (s - r);
    2.0 * gl(32, 0.0, theta0, |t| {
        let half = (0.5 * t).sin();
        let d2 = ds + 4.0 * s * r * half * half;
        let w = ((e2 - d2) / e2).max(0.0);
        BUMP_NORM * w * w * w / e2
    })
}

/// Shared smoothed backgrounds keyed by the bit pattern of ε.
pub fn smoothed_background(eps: f64) -> Result<Arc<SmoothedBackground>> {
    static CACHE: OnceLock<Mutex<HashMap<u64, Arc<SmoothedBackground>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(b) = cache.lock().expect("cache lock").get(&eps.to_bits()) {
        return Ok(b.clone());
    }
    let b = Arc::new(SmoothedBackground::new(eps)?);
    cache.lock().expect("cache lock").insert(eps.to_bits(), b.clone());
    Ok(b)
}

/// Pot_N(z) = Σ log|z − x_i| − N 𝔥₀(z); −∞ when z hits a particle.
pub fn pot(config: &Configuration, z: Point) -> f64 {
    let mut s = 0.0;
    for p in config {
        let d2 = p.dist_sqr(z);
        if d2 == 0.0 {
            return f64::NEG_INFINITY;
        }
        s += 0.5 * d2.ln();
    }
    s - config.len() as f64 * h0(z)
}

fn pot_reg_with(config: &Configuration, z: Point, bg: &SmoothedBackground) -> f64 {
    let eps = bg.eps;
    let mut s = 0.0;
    for p in config {
        s += mollified_log(p.dist(z), eps);
    }
    s - config.len() as f64 * bg.eval(z.norm())
}

/// Pot_{N,ε}(z) = L_N(ρ_ε ⋆ log_z).
pub fn pot_reg(config: &Configuration, z: Point, eps: f64) -> Result<f64> {
    Ok(pot_reg_with(config, z, &*smoothed_background(eps)?))
}

/// φ_{z,ε}(x) = (ρ_ε ⋆ log_z)(x) − g(x).
pub fn phi_ze(z: Point, eps: f64, center: &CenterSpec, x: Point) -> f64 {
    mollified_log(x.dist(z), eps) - center.g(x.norm())
}

/// Square lattice h·Z² restricted to the closed disk D(0, radius).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub radius: f64,
    pub spacing: f64,
}

impl GridSpec {
    pub fn new(radius: f64, spacing: f64) -> Result<Self> {
        if !(spacing > 0.0 && spacing.is_finite()) || !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!("bad grid: radius {radius}, spacing {spacing}")));
        }
        Ok(GridSpec { radius, spacing })
    }

    /// Nodes inside the disk, rows of increasing y, then increasing x.
    pub fn nodes(&self) -> Vec<Point> {
        let m = (self.radius / self.spacing).floor() as i64;
        let mut out = Vec::new();
        for j in -m..=m {
            for i in -m..=m {
                let p = Point::new(i as f64 * self.spacing, j as f64 * self.spacing);
                if p.norm() <= self.radius {
                    out.push(p);
                }
            }
        }
        out
    }

    /// Area weight of one node.
    pub fn cell_area(&self) -> f64 {
        self.spacing * self.spacing
    }

    pub fn check_resolves(&self, eps: f64) -> Result<()> {
        if self.spacing > eps / 2.0 {
            return Err(Error::GridTooCoarse { spacing: self.spacing, eps });
        }
        Ok(())
    }
}

/// Values on the masked nodes of a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    pub grid: GridSpec,
    pub nodes: Vec<Point>,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn from_fn(grid: GridSpec, f: impl Fn(Point) -> f64 + Sync) -> Self {
        let nodes = grid.nodes();
        let values = nodes.par_iter().map(|&p| f(p)).collect();
        ScalarField { grid, nodes, values }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// CSV with columns x, y, value after `# key=value` header lines.
    pub fn to_csv(&self, header: &[(&str, String)]) -> String {
        let mut s = String::new();
        for (k, v) in header {
            writeln!(s, "# {k}={v}").expect("string write");
        }
        writeln!(s, "# grid_radius={}, grid_spacing={}", self.grid.radius, self.grid.spacing).expect("string write");
        s.push_str("x,y,value\n");
        for (p, v) in self.nodes.iter().zip(&self.values) {
            writeln!(s, "{},{},{}", p.x, p.y, v).expect("string write");
        }
        s
    }
}

/// Pot_{N,ε} at every node of `grid`; bitwise equal to pointwise `pot_reg`.
pub fn pot_field(config: &Configuration, eps: f64, grid: GridSpec) -> Result<ScalarField> {
    grid.check_resolves(eps)?;
    let bg = smoothed_background(eps)?;
    Ok(ScalarField::from_fn(grid, |z| pot_reg_with(config, z, &bg)))
}

/// Largest deviation from Newton's theorem of the three radial kernels
/// (ρ_ε, χ, m₀), each convolved with log by direct 2D quadrature and compared
/// with log of the distance at exterior points. Probes are multiples (> 1)
/// of each kernel's support radius.
pub fn newton_discrepancy(eps: f64, center: &CenterSpec, probes: &[f64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    let kernels: [(&dyn Fn(f64) -> f64, f64); 3] = [
        (&|r| bump(r, eps), eps),
        (&|r| center.chi(r), center.r_chi),
        (&|r| if r <= 1.0 { 1.0 / PI } else { 0.0 }, 1.0),
    ];
    for (kernel, support) in kernels {
        for &f in probes {
            let z = Point::new(support * f, 0.0);
            // ∫ k(|y|) log|z − y| dy over D(0, support), angular part first
            let v = adaptive_piecewise(
                |s| {
                    // periodic trapezoid rule, geometric in s/|z|
                    let m = 1024;
                    let ang: f64 = (0..m)
                        .map(|i| 0.5 * z.dist_sqr(Point::polar(s, 2.0 * PI * i as f64 / m as f64)).ln())
                        .sum::<f64>()
                        * (2.0 * PI / m as f64);
                    ang * kernel(s) * s
                },
                &[0.0, support],
                1e-14,
                1e-13,
            )?;
            worst = worst.max((v - z.norm().ln()).abs());
        }
    }
    // the closed forms themselves agree with log outside their supports
    for &f in probes {
        worst = worst.max((mollified_log(eps * f, eps) - (eps * f).ln()).abs());
        worst = worst.max((center.g(center.r_chi * f) - (center.r_chi * f).ln()).abs());
        worst = worst.max((h0_r(f) - f.ln()).abs());
    }
    Ok(worst)
}
