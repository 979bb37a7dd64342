//! Confinement, background potential, energies and background densities.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Configuration, Point, COINCIDENCE_TOL};
use crate::quadrature::{adaptive_piecewise, clipped_polar_integral, disk_integral, radial_integral};

/// Quadrature target for density integrals.
pub const DENSITY_TOL: f64 = 1e-10;

/// Confinement ζ at radius `r`.
#[inline]
pub fn zeta_r(r: f64) -> f64 {
    if r <= 1.0 {
        0.0
    } else {
        -r.ln() + 0.5 * r * r - 0.5
    }
}

#[inline]
pub fn zeta(x: Point) -> f64 {
    zeta_r(x.norm())
}

/// Log potential of the uniform unit-disk law at radius `r`.
#[inline]
pub fn h0_r(r: f64) -> f64 {
    if r <= 1.0 {
        0.5 * (r * r - 1.0)
    } else {
        r.ln()
    }
}

#[inline]
pub fn h0(z: Point) -> f64 {
    h0_r(z.norm())
}

/// ∫ h0 dm0.
pub const H0_MEAN: f64 = -0.25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ensemble {
    /// Weight exp(-β (F(X, m0) + 2N Σ ζ(x_i))).
    CanonicalF,
    /// Weight exp(-β (Σ_{i<j} -log|x_i - x_j| + (N/2) Σ |x_i|²)).
    PureQuadratic,
}

impl fmt::Display for Ensemble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ensemble::CanonicalF => "canonical-f",
            Ensemble::PureQuadratic => "pure-quadratic",
        })
    }
}

impl std::str::FromStr for Ensemble {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "canonical-f" => Ok(Ensemble::CanonicalF),
            "pure-quadratic" => Ok(Ensemble::PureQuadratic),
            other => Err(Error::InvalidParameter(format!("unknown ensemble '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n: usize,
    pub beta: f64,
    pub ensemble: Ensemble,
}

impl ModelParams {
    pub fn new(n: usize, beta: f64, ensemble: Ensemble) -> Result<Self> {
        let p = ModelParams { n, beta, ensemble };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::NonPositiveBeta(self.beta));
        }
        if self.n == 0 {
            return Err(Error::InvalidParameter("particle count must be at least 1".into()));
        }
        Ok(())
    }

    /// One-body term of the Gibbs energy for a single particle.
    #[inline]
    pub fn one_body(&self, x: Point) -> f64 {
        let n = self.n as f64;
        match self.ensemble {
            Ensemble::CanonicalF => {
                let r = x.norm();
                n * (h0_r(r) + 2.0 * zeta_r(r))
            }
            Ensemble::PureQuadratic => 0.5 * n * x.norm_sqr(),
        }
    }

    /// Gibbs energy up to an additive constant: the target density is
    /// proportional to exp(-β · gibbs_energy).
    pub fn gibbs_energy(&self, config: &Configuration) -> Result<f64> {
        Ok(pair_energy(config)? + config.iter().map(|&p| self.one_body(p)).sum::<f64>())
    }
}

/// Σ_{i<j} -log|x_i - x_j|.
pub fn pair_energy(config: &Configuration) -> Result<f64> {
    let pts = config.points();
    let tol2 = COINCIDENCE_TOL * COINCIDENCE_TOL;
    let mut s = 0.0;
    for (i, p) in pts.iter().enumerate() {
        for (j, q) in pts.iter().enumerate().skip(i + 1) {
            let d2 = p.dist_sqr(*q);
            if d2 < tol2 {
                return Err(Error::CoincidentPoints(i, j));
            }
            s -= 0.5 * d2.ln();
        }
    }
    Ok(s)
}

/// Σ_{i<j} -log|x_i - x_j| + (N/2) Σ |x_i|².
pub fn energy_quadratic(config: &Configuration) -> Result<f64> {
    let n = config.len() as f64;
    Ok(pair_energy(config)? + 0.5 * n * config.moment2())
}

/// Interaction energy of the configuration against the neutralizing
/// background `background` (total particle charge N).
pub fn energy_f(config: &Configuration, background: &Density) -> Result<f64> {
    let n = config.len() as f64;
    let pairs = pair_energy(config)?;
    if background.is_equilibrium() {
        let one_body: f64 = config.iter().map(|&p| h0(p)).sum();
        return Ok(pairs + n * one_body + n * n / 8.0);
    }
    let mut one_body = 0.0;
    for &p in config {
        one_body += background.log_potential(p)?;
    }
    Ok(pairs + n * one_body + 0.5 * n * n * background.self_energy()?)
}

/// Evaluation rule of a planar function.
#[derive(Clone)]
pub enum Shape {
    Radial(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
    General(Arc<dyn Fn(Point) -> f64 + Send + Sync>),
}

impl fmt::Debug for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Shape::Radial(_) => "Radial(..)",
            Shape::General(_) => "General(..)",
        })
    }
}

/// A real function on the plane supported in D(0, support), with optional
/// radii where it may fail to be smooth.
#[derive(Clone, Debug)]
pub struct PlanarFn {
    pub shape: Shape,
    pub support: f64,
    pub breaks: Vec<f64>,
}

impl PlanarFn {
    pub fn radial(f: impl Fn(f64) -> f64 + Send + Sync + 'static, support: f64, breaks: Vec<f64>) -> Self {
        PlanarFn { shape: Shape::Radial(Arc::new(f)), support, breaks }
    }

    pub fn general(f: impl Fn(Point) -> f64 + Send + Sync + 'static, support: f64, breaks: Vec<f64>) -> Self {
        PlanarFn { shape: Shape::General(Arc::new(f)), support, breaks }
    }

    #[inline]
    pub fn eval(&self, p: Point) -> f64 {
        let r = p.norm();
        if r > self.support {
            return 0.0;
        }
        match &self.shape {
            Shape::Radial(f) => f(r),
            Shape::General(f) => f(p),
        }
    }

    pub fn is_radial(&self) -> bool {
        matches!(self.shape, Shape::Radial(_))
    }

    fn radial_breaks(&self) -> Vec<f64> {
        let mut b = vec![0.0];
        b.extend(self.breaks.iter().copied().filter(|&x| x > 0.0 && x < self.support));
        b.push(self.support);
        b.sort_by(f64::total_cmp);
        b
    }

    /// ∫ g(f(p)) dp over the support.
    pub fn integrate_with(&self, g: impl Fn(f64) -> f64, tol: f64) -> Result<f64> {
        match &self.shape {
            Shape::Radial(f) => radial_integral(|r| g(f(r)), &self.radial_breaks(), tol),
            Shape::General(f) => disk_integral(|p| g(f(p)), Point::ORIGIN, self.support, &self.breaks, tol),
        }
    }

    pub fn integral(&self, tol: f64) -> Result<f64> {
        self.integrate_with(|v| v, tol)
    }

    /// Sample points covering the support, for sign checks.
    fn probe_points(&self) -> Vec<Point> {
        let mut out = Vec::new();
        let nr = 400;
        let na = if self.is_radial() { 1 } else { 256 };
        for i in 0..=nr {
            let r = self.support * i as f64 / nr as f64;
            for k in 0..na {
                out.push(Point::polar(r, 2.0 * PI * k as f64 / na as f64));
            }
        }
        for &b in &self.breaks {
            for k in 0..na {
                out.push(Point::polar(b, 2.0 * PI * k as f64 / na as f64));
            }
        }
        out
    }
}

/// A probability density on the plane with compact support.
#[derive(Clone, Debug)]
pub struct Density {
    f: PlanarFn,
    equilibrium: bool,
}

impl Density {
    /// Uniform law on the unit disk; energies use closed forms.
    pub fn equilibrium() -> Self {
        Density { f: PlanarFn::radial(|_| 1.0 / PI, 1.0, vec![]), equilibrium: true }
    }

    /// Uniform law on D(0, radius), evaluated through the generic
    /// quadrature paths.
    pub fn uniform_disk(radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidParameter(format!("disk radius {radius}")));
        }
        let c = 1.0 / (PI * radius * radius);
        Ok(Density { f: PlanarFn::radial(move |_| c, radius, vec![]), equilibrium: false })
    }

    /// Validates nonnegativity and unit mass.
    pub fn from_fn(f: PlanarFn) -> Result<Self> {
        for p in f.probe_points() {
            let v = f.eval(p);
            if v < 0.0 || !v.is_finite() {
                return Err(Error::NegativeDensity { x: p.x, y: p.y, value: v });
            }
        }
        let mass = f.integral(DENSITY_TOL)?;
        if (mass - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidParameter(format!("density mass {mass}, expected 1")));
        }
        Ok(Density { f, equilibrium: false })
    }

    /// Same law with closed forms disabled.
    pub fn without_closed_form(mut self) -> Self {
        self.equilibrium = false;
        self
    }

    pub fn is_equilibrium(&self) -> bool {
        self.equilibrium
    }

    pub fn planar(&self) -> &PlanarFn {
        &self.f
    }

    #[inline]
    pub fn eval(&self, p: Point) -> f64 {
        self.f.eval(p)
    }

    pub fn support_radius(&self) -> f64 {
        self.f.support
    }

    pub fn mass(&self) -> Result<f64> {
        self.f.integral(DENSITY_TOL)
    }

    /// ∫ log|x - y| dm(y).
    pub fn log_potential(&self, x: Point) -> Result<f64> {
        if self.equilibrium {
            return Ok(h0(x));
        }
        match &self.f.shape {
            Shape::Radial(rho) => {
                // Newton: ∫ log max(|x|, s) dm(s)
                let r = x.norm();
                let b = self.f.radial_breaks();
                let inner: Vec<f64> = b.iter().copied().filter(|&s| s < r).chain([r.min(self.f.support)]).collect();
                let outer: Vec<f64> = [r.min(self.f.support)].into_iter().chain(b.iter().copied().filter(|&s| s > r)).collect();
                let m_in = 2.0 * PI * adaptive_piecewise(|s| rho(s) * s, &inner, 1e-13, 1e-13)?;
                let tail = 2.0 * PI * adaptive_piecewise(|s| rho(s) * s * s.ln(), &outer, 1e-13, 1e-13)?;
                Ok(if r > 0.0 { m_in * r.ln() } else { 0.0 } + tail)
            }
            Shape::General(rho) => {
                let rho = rho.clone();
                clipped_polar_integral(|r, y| r.ln() * rho(y), x, self.f.support, &[], 1e-11)
            }
        }
    }

    /// ∬ -log|x - y| dm(x) dm(y).
    pub fn self_energy(&self) -> Result<f64> {
        if self.equilibrium {
            return Ok(-H0_MEAN);
        }
        let mut failure = None;
        let v = match &self.f.shape {
            Shape::Radial(rho) => radial_integral(
                |r| match self.log_potential(Point::new(r, 0.0)) {
                    Ok(u) => -u * rho(r),
                    Err(e) => {
                        failure.get_or_insert(e);
                        0.0
                    }
                },
                &self.f.radial_breaks(),
                1e-11,
            )?,
            Shape::General(rho) => disk_integral(
                |p| match self.log_potential(p) {
                    Ok(u) => -u * rho(p),
                    Err(e) => {
                        failure.get_or_insert(e);
                        0.0
                    }
                },
                Point::ORIGIN,
                self.f.support,
                &self.f.breaks,
                1e-9,
            )?,
        };
        match failure {
            Some(e) => Err(e),
            None => Ok(v),
        }
    }
}

/// ∫ ρ log ρ over the support.
pub fn entropy(density: &Density) -> Result<f64> {
    let mut negative = None;
    let f = density.planar();
    let v = match &f.shape {
        Shape::Radial(rho) => radial_integral(
            |r| {
                let v = rho(r);
                if v < 0.0 {
                    negative.get_or_insert(Error::NegativeDensity { x: r, y: 0.0, value: v });
                    return 0.0;
                }
                if v == 0.0 { 0.0 } else { v * v.ln() }
            },
            &f.radial_breaks(),
            1e-11,
        )?,
        Shape::General(rho) => disk_integral(
            |p| {
                let v = rho(p);
                if v < 0.0 {
                    negative.get_or_insert(Error::NegativeDensity { x: p.x, y: p.y, value: v });
                    return 0.0;
                }
                if v == 0.0 { 0.0 } else { v * v.ln() }
            },
            Point::ORIGIN,
            f.support,
            &f.breaks,
            1e-10,
        )?,
    };
    match negative {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// Density ρ0 + sΔφ with s = -t / (2πNβ), ρ0 the uniform unit-disk law.
pub fn perturbed_density(laplacian: &PlanarFn, t: f64, params: &ModelParams) -> Result<Density> {
    params.validate()?;
    let lap_mass = laplacian.integral(1e-11)?;
    if lap_mass.abs() > 1e-8 {
        return Err(Error::MassNotZero(lap_mass));
    }
    if t == 0.0 {
        return Ok(Density::equilibrium());
    }
    let s = -t / (2.0 * PI * params.n as f64 * params.beta);
    let support = laplacian.support.max(1.0);
    let mut breaks = laplacian.breaks.clone();
    if support > 1.0 {
        breaks.push(1.0);
    }
    let base = |r: f64| if r <= 1.0 { 1.0 / PI } else { 0.0 };
    let f = match &laplacian.shape {
        Shape::Radial(l) => {
            let l = l.clone();
            PlanarFn::radial(move |r| base(r) + s * l(r), support, breaks)
        }
        Shape::General(l) => {
            let l = l.clone();
            PlanarFn::general(move |p| base(p.norm()) + s * l(p), support, breaks)
        }
    };
    Density::from_fn(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(xy: &[(f64, f64)]) -> Configuration {
        Configuration::from_xy(xy).unwrap()
    }

    #[test]
    fn zeta_values() {
        assert_eq!(zeta(Point::new(0.5, 0.0)), 0.0);
        assert_eq!(zeta(Point::new(1.0, 0.0)), 0.0);
        assert!((zeta(Point::new(0.0, 2.0)) - (1.5 - 2f64.ln())).abs() < 1e-15);
        assert!((zeta(Point::new(0.0, 2.0)) - 0.806853).abs() < 1e-6);
    }

    #[test]
    fn h0_values() {
        assert_eq!(h0(Point::ORIGIN), -0.5);
        assert_eq!(h0(Point::new(1.0, 0.0)), 0.0);
        assert!((h0(Point::new(std::f64::consts::E, 0.0)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn h0_mean_against_uniform_disk() {
        let v = radial_integral(|r| h0_r(r) / PI, &[0.0, 1.0], 1e-12).unwrap();
        assert!((v - H0_MEAN).abs() < 1e-10);
    }

    #[test]
    fn two_particle_energies() {
        let c = cfg(&[(0.5, 0.0), (-0.5, 0.0)]);
        let f = energy_f(&c, &Density::equilibrium()).unwrap();
        assert!((f + 1.0).abs() < 1e-14, "{f}");
        let q = energy_quadratic(&c).unwrap();
        assert!((q - 0.5).abs() < 1e-14);
    }

    #[test]
    fn two_particle_energy_by_quadrature() {
        let c = cfg(&[(0.5, 0.0), (-0.5, 0.0)]);
        let m = Density::equilibrium().without_closed_form();
        let f = energy_f(&c, &m).unwrap();
        assert!((f + 1.0).abs() < 1e-9, "{f}");
        assert!((m.self_energy().unwrap() - 0.25).abs() < 1e-10);
    }

    #[test]
    fn coincident_points_rejected() {
        let c = cfg(&[(0.1, 0.2), (0.1, 0.2)]);
        assert_eq!(energy_f(&c, &Density::equilibrium()), Err(Error::CoincidentPoints(0, 1)));
        assert_eq!(energy_quadratic(&c), Err(Error::CoincidentPoints(0, 1)));
    }

    #[test]
    fn entropy_of_uniform_disks() {
        assert!((entropy(&Density::equilibrium()).unwrap() + PI.ln()).abs() < 1e-10);
        let d = Density::uniform_disk(0.5).unwrap();
        let area = PI * 0.25;
        assert!((entropy(&d).unwrap() + area.ln()).abs() < 1e-10);
    }

    #[test]
    fn negative_density_rejected() {
        let f = PlanarFn::general(|p| if p.x > 0.9 { -1.0 } else { 1.0 / PI }, 1.0, vec![]);
        assert!(matches!(Density::from_fn(f.clone()), Err(Error::NegativeDensity { .. })));
        let d = Density { f, equilibrium: false };
        assert!(matches!(entropy(&d), Err(Error::NegativeDensity { .. })));
    }

    #[test]
    fn perturbation_checks() {
        let p = ModelParams::new(4, 2.0, Ensemble::CanonicalF).unwrap();
        // Laplacian of a mass-1 bump minus the uniform law: zero mass
        let lap = PlanarFn::radial(|r| 2.0 * PI * (4.0 / PI * (1.0 - r * r).powi(3) - 1.0 / PI), 1.0, vec![]);
        let d = perturbed_density(&lap, 0.3, &p).unwrap();
        assert!((d.mass().unwrap() - 1.0).abs() < 1e-9);
        let d0 = perturbed_density(&lap, 0.0, &p).unwrap();
        assert!(d0.is_equilibrium());
        // too large a tilt makes the density negative
        assert!(matches!(perturbed_density(&lap, -200.0, &p), Err(Error::NegativeDensity { .. })));
        // χ alone has Laplacian mass 2π
        let chi = PlanarFn::radial(|r| 2.0 * PI * 4.0 / PI * (1.0 - r * r).powi(3), 1.0, vec![]);
        assert!(matches!(perturbed_density(&chi, 0.3, &p), Err(Error::MassNotZero(_))));
    }

    #[test]
    fn ensemble_round_trip() {
        for e in [Ensemble::CanonicalF, Ensemble::PureQuadratic] {
            assert_eq!(e.to_string().parse::<Ensemble>().unwrap(), e);
        }
        assert!(ModelParams::new(2, 0.0, Ensemble::CanonicalF).is_err());
    }
}
