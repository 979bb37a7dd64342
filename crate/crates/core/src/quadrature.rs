//! One- and two-dimensional quadrature: fixed Gauss-Legendre panels (nodes
//! from `gauss-quad`) and a globally adaptive Gauss-Kronrod (7, 15) rule.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::num::NonZeroUsize;
use std::sync::{Mutex, OnceLock};

use gauss_quad::legendre::GaussLegendre;

use crate::error::{Error, Result};
use crate::geometry::Point;

/// Gauss-Legendre nodes and weights on [-1, 1], cached per degree.
pub fn gauss_legendre(n: usize) -> &'static [(f64, f64)] {
    static CACHE: OnceLock<Mutex<HashMap<usize, &'static [(f64, f64)]>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("quadrature cache poisoned");
    guard.entry(n).or_insert_with(|| {
        let rule = GaussLegendre::new(NonZeroUsize::new(n).expect("degree must be positive"));
        let pairs: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
        Box::leak(pairs.into_boxed_slice())
    })
}

/// Fixed n-point Gauss-Legendre on [a, b].
#[inline]
pub fn gl(n: usize, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    let mut s = 0.0;
    for &(x, w) in gauss_legendre(n) {
        s += w * f(mid + half * x);
    }
    s * half
}

/// n-point Gauss-Legendre on each interval between consecutive breakpoints.
/// Breakpoints must be sorted; repeated values are skipped.
pub fn gl_piecewise(n: usize, breaks: &[f64], mut f: impl FnMut(f64) -> f64) -> f64 {
    breaks
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| gl(n, w[0], w[1], &mut f))
        .sum()
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut resk = fc * WGK[7];
    let mut resg = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        resk += WGK[j] * s;
        if j % 2 == 1 {
            resg += WG[j / 2] * s;
        }
    }
    (resk * h, ((resk - resg) * h).abs())
}

/// Adaptive Gauss-Kronrod integration of `f` over [a, b].
///
/// Stops when the summed error estimate is below `max(abs_tol, rel_tol*|I|)`.
pub fn adaptive(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64> {
    const MAX_INTERVALS: usize = 4000;
    if a == b {
        return Ok(0.0);
    }
    let (v, e) = gk15(&mut f, a, b);
    let mut parts = vec![(a, b, v, e)];
    let mut total = v;
    let mut err = e;
    loop {
        if !total.is_finite() {
            return Err(Error::QuadratureFailure(format!("non-finite integrand on [{a}, {b}]")));
        }
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(total);
        }
        if parts.len() >= MAX_INTERVALS {
            return Err(Error::QuadratureFailure(format!(
                "error estimate {err:.3e} after {MAX_INTERVALS} subdivisions on [{a}, {b}]"
            )));
        }
        let (idx, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("nonempty");
        let (lo, hi, pv, pe) = parts.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // interval below floating resolution; accept it as is
            parts.push((lo, hi, pv, 0.0));
            err -= pe;
            continue;
        }
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        total += v1 + v2 - pv;
        err += e1 + e2 - pe;
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
}

/// Adaptive integration over consecutive breakpoint intervals.
pub fn adaptive_piecewise(
    mut f: impl FnMut(f64) -> f64,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64> {
    let pieces = breaks.windows(2).filter(|w| w[1] > w[0]).count().max(1) as f64;
    let mut s = 0.0;
    for w in breaks.windows(2).filter(|w| w[1] > w[0]) {
        s += adaptive(&mut f, w[0], w[1], abs_tol / pieces, rel_tol)?;
    }
    Ok(s)
}

/// 2π ∫_0^R f(r) r dr for a radial integrand.
pub fn radial_integral(mut f: impl FnMut(f64) -> f64, breaks: &[f64], tol: f64) -> Result<f64> {
    let v = adaptive_piecewise(|r| f(r) * r, breaks, tol / (2.0 * PI), tol)?;
    Ok(2.0 * PI * v)
}

/// ∫ f over the disk D(center, radius), nested adaptive in polar coordinates.
/// `radial_breaks` are extra radii (relative to `center`) where `f` may kink.
pub fn disk_integral(
    mut f: impl FnMut(Point) -> f64,
    center: Point,
    radius: f64,
    radial_breaks: &[f64],
    tol: f64,
) -> Result<f64> {
    let mut breaks = vec![0.0];
    breaks.extend(radial_breaks.iter().copied().filter(|&b| b > 0.0 && b < radius));
    breaks.push(radius);
    breaks.sort_by(f64::total_cmp);
    let inner_tol = tol / (2.0 * PI * radius.max(1.0));
    let mut failure = None;
    let outer = adaptive_piecewise(
        |r| {
            if r == 0.0 {
                return 0.0;
            }
            match adaptive(
                |t| f(center + Point::polar(r, t)),
                0.0,
                2.0 * PI,
                inner_tol,
                1e-12,
            ) {
                Ok(v) => v * r,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        },
        &breaks,
        tol,
        1e-12,
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(outer),
    }
}

/// ∫ over D(0, support) of f(|y - x|, y) dy, in polar coordinates about `x`.
///
/// For each radius the admissible angles form a single arc, so the inner
/// integrand has no jump even when `f` is discontinuous at the support edge.
/// `radial_breaks` are extra radii (about `x`) where `f` may kink.
pub fn clipped_polar_integral(
    mut f: impl FnMut(f64, Point) -> f64,
    x: Point,
    support: f64,
    radial_breaks: &[f64],
    tol: f64,
) -> Result<f64> {
    let d = x.norm();
    let r_max = support + d;
    let mut breaks = vec![0.0, r_max];
    if d > 0.0 && support > d {
        breaks.push(support - d);
    } else if d > support {
        breaks.push(d - support);
    }
    breaks.extend(radial_breaks.iter().copied().filter(|&b| b > 0.0 && b < r_max));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let theta0 = x.y.atan2(x.x);
    let inner_tol = tol / (2.0 * PI * r_max.max(1.0));
    let mut failure = None;
    let outer = adaptive_piecewise(
        |r| {
            if r == 0.0 {
                return 0.0;
            }
            // |x + r e^{iθ}| <= support  <=>  cos(θ - θ0) <= c
            let (lo, hi) = if d == 0.0 {
                if r <= support {
                    (0.0, 2.0 * PI)
                } else {
                    return 0.0;
                }
            } else {
                let c = (support * support - d * d - r * r) / (2.0 * r * d);
                if c >= 1.0 {
                    (0.0, 2.0 * PI)
                } else if c <= -1.0 {
                    return 0.0;
                } else {
                    let a = c.acos();
                    (a, 2.0 * PI - a)
                }
            };
            match adaptive(
                |t| f(r, x + Point::polar(r, theta0 + t)),
                lo,
                hi,
                inner_tol,
                1e-12,
            ) {
                Ok(v) => v * r,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        },
        &breaks,
        tol,
        1e-12,
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(outer),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clipped_polar_matches_disk_area_and_log_potential() {
        let x = Point::new(0.6, 0.3);
        let a = clipped_polar_integral(|_, _| 1.0, x, 1.0, &[], 1e-11).unwrap();
        assert!((a - PI).abs() < 1e-9);
        // uniform unit-disk log potential at |x| < 1 is (|x|^2 - 1)/2
        let u = clipped_polar_integral(|r, _| r.ln() / PI, x, 1.0, &[], 1e-11).unwrap();
        assert!((u - (x.norm_sqr() - 1.0) / 2.0).abs() < 1e-9, "{u}");
        let far = Point::new(0.0, 3.0);
        let u = clipped_polar_integral(|r, _| r.ln() / PI, far, 1.0, &[], 1e-11).unwrap();
        assert!((u - 3f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn gl_integrates_polynomials_exactly() {
        let v = gl(8, 0.0, 2.0, |x| x.powi(15));
        assert!((v - 2f64.powi(16) / 16.0).abs() < 1e-9);
    }

    #[test]
    fn adaptive_handles_log_singularity() {
        let v = adaptive(|x: f64| x.ln(), 0.0, 1.0, 1e-12, 1e-12).unwrap();
        assert!((v + 1.0).abs() < 1e-10, "{v}");
    }

    #[test]
    fn adaptive_sqrt_endpoint() {
        let v = adaptive(|x: f64| x.sqrt(), 0.0, 1.0, 1e-12, 1e-12).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-11);
    }

    #[test]
    fn disk_area_and_second_moment() {
        let a = disk_integral(|_| 1.0, Point::new(0.3, -0.2), 0.7, &[], 1e-10).unwrap();
        assert!((a - PI * 0.49).abs() < 1e-9);
        let m = disk_integral(|p| p.norm_sqr(), Point::ORIGIN, 1.0, &[], 1e-10).unwrap();
        assert!((m - PI / 2.0).abs() < 1e-9);
    }
}
