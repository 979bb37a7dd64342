//! Cached one-dimensional radial functions.

use crate::error::{Error, Result};

/// Rule used beyond the last tabulated radius.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Tail {
    /// `coef * ln r + offset`
    Log { coef: f64, offset: f64 },
    Constant(f64),
}

impl Tail {
    #[inline]
    fn eval(self, r: f64) -> f64 {
        match self {
            Tail::Log { coef, offset } => coef * r.ln() + offset,
            Tail::Constant(c) => c,
        }
    }
}

/// Cubic spline (not-a-knot) through tabulated radii with an analytic tail.
#[derive(Clone, Debug)]
pub struct RadialProfile {
    radii: Vec<f64>,
    values: Vec<f64>,
    second: Vec<f64>,
    tail: Tail,
}

/// Default table size for cached profiles.
pub const PROFILE_NODES: usize = 4096;

/// `count` radii on [0, r_max]: zero followed by log-spaced radii from
/// `r_max * min_frac` to `r_max`.
pub fn log_spaced_radii(r_max: f64, count: usize, min_frac: f64) -> Vec<f64> {
    assert!(count >= 3 && r_max > 0.0 && min_frac > 0.0 && min_frac < 1.0);
    let m = count - 1;
    let lo = (r_max * min_frac).ln();
    let hi = r_max.ln();
    let mut r = Vec::with_capacity(count);
    r.push(0.0);
    for i in 0..m {
        let t = i as f64 / (m - 1) as f64;
        r.push((lo + t * (hi - lo)).exp());
    }
    *r.last_mut().expect("nonempty") = r_max;
    r
}

/// `count` equally spaced radii on [lo, hi].
pub fn uniform_radii(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(count >= 3 && hi > lo);
    (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect()
}

impl RadialProfile {
    pub fn new(radii: Vec<f64>, values: Vec<f64>, tail: Tail) -> Result<Self> {
        let n = radii.len();
        if n < 4 || values.len() != n {
            return Err(Error::InvalidParameter("profile needs >= 4 matching nodes".into()));
        }
        if radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("profile radii must increase".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("profile values must be finite".into()));
        }
        let last = radii[n - 1];
        let tail_gap = (tail.eval(last) - values[n - 1]).abs();
        if tail_gap > 1e-8 * values[n - 1].abs().max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "tail rule disagrees with last node by {tail_gap:.3e}"
            )));
        }
        let second = not_a_knot_second_derivatives(&radii, &values);
        Ok(RadialProfile { radii, values, second, tail })
    }

    pub fn tabulate(radii: Vec<f64>, f: impl Fn(f64) -> f64, tail: Tail) -> Result<Self> {
        let values = radii.iter().map(|&r| f(r)).collect();
        Self::new(radii, values, tail)
    }

    pub fn r_max(&self) -> f64 {
        *self.radii.last().expect("nonempty")
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tail(&self) -> Tail {
        self.tail
    }

    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        let n = self.radii.len();
        if r >= self.radii[n - 1] {
            return self.tail.eval(r);
        }
        let i = match self.radii.partition_point(|&x| x <= r) {
            0 => 0,
            k => k - 1,
        };
        let (x0, x1) = (self.radii[i], self.radii[i + 1]);
        let h = x1 - x0;
        let a = (x1 - r) / h;
        let b = (r - x0) / h;
        a * self.values[i]
            + b * self.values[i + 1]
            + ((a * a * a - a) * self.second[i] + (b * b * b - b) * self.second[i + 1]) * h * h / 6.0
    }
}

fn not_a_knot_second_derivatives(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let d: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    // unknowns M_1 .. M_{n-2}
    let m = n - 2;
    let mut sub = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut sup = vec![0.0; m];
    let mut rhs = vec![0.0; m];
    for k in 0..m {
        let i = k + 1;
        sub[k] = h[i - 1];
        diag[k] = 2.0 * (h[i - 1] + h[i]);
        sup[k] = h[i];
        rhs[k] = 6.0 * (d[i] - d[i - 1]);
    }
    // M_0 = ((h0+h1) M_1 - h0 M_2) / h1
    let (h0, h1) = (h[0], h[1]);
    diag[0] += h0 * (h0 + h1) / h1;
    sup[0] -= h0 * h0 / h1;
    // M_{n-1} = ((h_{n-2}+h_{n-3}) M_{n-2} - h_{n-2} M_{n-3}) / h_{n-3}
    let (ha, hb) = (h[n - 3], h[n - 2]);
    diag[m - 1] += hb * (ha + hb) / ha;
    sub[m - 1] -= hb * hb / ha;
    // Thomas
    for k in 1..m {
        let w = sub[k] / diag[k - 1];
        diag[k] -= w * sup[k - 1];
        rhs[k] -= w * rhs[k - 1];
    }
    let mut mm = vec![0.0; m];
    mm[m - 1] = rhs[m - 1] / diag[m - 1];
    for k in (0..m - 1).rev() {
        mm[k] = (rhs[k] - sup[k] * mm[k + 1]) / diag[k];
    }
    let mut out = vec![0.0; n];
    out[1..n - 1].copy_from_slice(&mm);
    out[0] = ((h0 + h1) * out[1] - h0 * out[2]) / h1;
    out[n - 1] = ((ha + hb) * out[n - 2] - hb * out[n - 3]) / ha;
    out
}
