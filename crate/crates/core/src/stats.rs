//! Estimators and goodness-of-fit tests used by the experiments.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    /// Standard error of the mean.
    pub stderr: f64,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; zero for fewer than two samples.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn summarize(xs: &[f64]) -> Summary {
    let n = xs.len();
    let v = variance(xs);
    Summary {
        count: n,
        mean: if n == 0 { f64::NAN } else { mean(xs) },
        variance: v,
        stderr: if n == 0 { f64::NAN } else { (v / n as f64).sqrt() },
    }
}

/// Standard error of the unbiased variance estimate, from the fourth
/// central moment.
pub fn variance_stderr(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if n < 4.0 {
        return f64::NAN;
    }
    let m = mean(xs);
    let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    ((m4 - m2 * m2 * (n - 3.0) / (n - 1.0)) / n).max(0.0).sqrt()
}

/// Leave-one-out jackknife for f(mean of xs): (estimate, stderr).
pub fn jackknife_of_mean(xs: &[f64], f: impl Fn(f64) -> f64) -> (f64, f64) {
    let n = xs.len();
    let total: f64 = xs.iter().sum();
    let est = f(total / n as f64);
    if n < 2 {
        return (est, f64::NAN);
    }
    let loo: Vec<f64> = xs.iter().map(|x| f((total - x) / (n - 1) as f64)).collect();
    let lm = mean(&loo);
    let v = loo.iter().map(|y| (y - lm) * (y - lm)).sum::<f64>() * (n - 1) as f64 / n as f64;
    (est, v.sqrt())
}

/// Kolmogorov survival function Q(λ) = 2 Σ (-1)^{k-1} exp(-2k²λ²).
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value
/// (Stephens' small-sample correction).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = x[i].min(y[j]);
        while i < n && x[i] <= v {
            i += 1;
        }
        while j < m && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let sq = ne.sqrt();
    KsResult { statistic: d, p_value: kolmogorov_q((sq + 0.12 + 0.11 / sq) * d) }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdResult {
    /// Modified statistic A*² = A²(1 + 0.75/n + 2.25/n²).
    pub statistic: f64,
    pub p_value: f64,
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Anderson-Darling test of normality with mean and variance estimated
/// from the sample.
pub fn anderson_darling_normal(xs: &[f64]) -> AdResult {
    let n = xs.len();
    let m = mean(xs);
    let s = variance(xs).sqrt();
    let mut z: Vec<f64> = xs.iter().map(|x| (x - m) / s).collect();
    z.sort_by(f64::total_cmp);
    let nf = n as f64;
    let mut acc = 0.0;
    for i in 0..n {
        let f_lo = std_normal_cdf(z[i]).clamp(1e-300, 1.0);
        let f_hi = (1.0 - std_normal_cdf(z[n - 1 - i])).clamp(1e-300, 1.0);
        acc += (2 * i + 1) as f64 * (f_lo.ln() + f_hi.ln());
    }
    let a2 = -nf - acc / nf;
    let a = a2 * (1.0 + 0.75 / nf + 2.25 / (nf * nf));
    let p = if a >= 0.6 {
        (1.2937 - 5.709 * a + 0.0186 * a * a).exp()
    } else if a >= 0.34 {
        (0.9177 - 4.279 * a - 1.38 * a * a).exp()
    } else if a >= 0.2 {
        1.0 - (-8.318 + 42.796 * a - 59.938 * a * a).exp()
    } else {
        1.0 - (-13.436 + 101.14 * a - 223.73 * a * a).exp()
    };
    AdResult { statistic: a, p_value: p.clamp(0.0, 1.0) }
}

/// 95% Wilson score interval for k successes in n trials.
pub fn wilson_interval(k: usize, n: usize) -> (f64, f64) {
    const Z: f64 = 1.959_963_984_540_054;
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = Z * Z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = Z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
}

/// Ordinary least squares y = a + b x.
pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    let n = x.len() as f64;
    let mx = mean(x);
    let my = mean(y);
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let slope_stderr = if n > 2.0 { (rss / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    LinearFit { slope, intercept, slope_stderr }
}

/// Effective sample size by Geyer's initial positive sequence estimator.
/// Returns `None` for a constant trace.
pub fn ess_geyer(trace: &[f64]) -> Option<f64> {
    let n = trace.len();
    if n < 4 {
        return Some(n as f64);
    }
    let m = mean(trace);
    let c0 = trace.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n as f64;
    if c0 <= 0.0 || !c0.is_finite() {
        return None;
    }
    let acov = |k: usize| -> f64 {
        (0..n - k).map(|i| (trace[i] - m) * (trace[i + k] - m)).sum::<f64>() / n as f64
    };
    let mut sum_pairs = 0.0;
    let mut prev_pair = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < n {
        let g = acov(2 * k) + acov(2 * k + 1);
        if g <= 0.0 {
            break;
        }
        // initial monotone sequence
        let g = g.min(prev_pair);
        prev_pair = g;
        sum_pairs += g;
        k += 1;
    }
    let tau = (2.0 * sum_pairs / c0 - 1.0).max(1e-12);
    Some((n as f64 / tau).min(n as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn gaussian(n: usize, seed: u64) -> Vec<f64> {
        let mut r = rng_from_seed(seed);
        (0..n).map(|_| r.sample::<f64, _>(StandardNormal)).collect()
    }

    #[test]
    fn summary_of_known_sample() {
        let s = summarize(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.variance - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ks_identical_and_shifted() {
        let a = gaussian(2000, 1);
        let b = gaussian(2000, 2);
        assert!(ks_two_sample(&a, &b).p_value > 0.01);
        let c: Vec<f64> = b.iter().map(|x| x + 0.5).collect();
        assert!(ks_two_sample(&a, &c).p_value < 1e-6);
        assert_eq!(ks_two_sample(&a, &a).statistic, 0.0);
    }

    #[test]
    fn kolmogorov_reference_value() {
        // Q(1.358) ≈ 0.05
        assert!((kolmogorov_q(1.358) - 0.05).abs() < 5e-4);
    }

    #[test]
    fn anderson_darling_accepts_gaussian_rejects_exponential() {
        let a = gaussian(1000, 3);
        assert!(anderson_darling_normal(&a).p_value > 0.01);
        let e: Vec<f64> = a.iter().map(|x| x.exp()).collect();
        assert!(anderson_darling_normal(&e).p_value < 1e-6);
    }

    #[test]
    fn wilson_interval_edges() {
        let (lo, hi) = wilson_interval(0, 200);
        assert!(lo.abs() < 1e-15);
        assert!(hi > 0.0 && hi < 0.02);
        let (lo, hi) = wilson_interval(200, 200);
        assert!(lo > 0.98 && (hi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ess_of_iid_and_correlated_traces() {
        let a = gaussian(20000, 4);
        let e = ess_geyer(&a).unwrap();
        assert!((e / 20000.0 - 1.0).abs() < 0.2, "{e}");
        // AR(1) with coefficient 0.9: ESS ≈ n (1 - 0.9) / (1 + 0.9)
        let mut ar = vec![0.0; 20000];
        for i in 1..ar.len() {
            ar[i] = 0.9 * ar[i - 1] + a[i];
        }
        let e = ess_geyer(&ar).unwrap();
        let expect = 20000.0 * 0.1 / 1.9;
        assert!((e / expect - 1.0).abs() < 0.3, "{e} vs {expect}");
        assert!(ess_geyer(&[2.0; 100]).is_none());
    }

    #[test]
    fn linear_fit_exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 0.5 * v - 1.0).collect();
        let f = linear_fit(&x, &y);
        assert!((f.slope - 0.5).abs() < 1e-14 && (f.intercept + 1.0).abs() < 1e-14);
    }

    #[test]
    fn jackknife_of_plain_mean_is_classic_stderr() {
        let a = gaussian(500, 5);
        let (m, se) = jackknife_of_mean(&a, |v| v);
        let s = summarize(&a);
        assert!((m - s.mean).abs() < 1e-14 && (se - s.stderr).abs() < 1e-12);
    }
}
