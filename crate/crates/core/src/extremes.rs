//! Maximum of the regularized potential, the law-of-large-numbers ladder
//! and tail probabilities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Configuration, Point};
use crate::potential::{pot_field, GridSpec, ScalarField};
use crate::stats::{summarize, wilson_interval};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxReport {
    pub argmax: Point,
    pub value: f64,
    pub grid: GridSpec,
    pub epsilon: f64,
    pub n: usize,
    pub beta: f64,
    /// value / log N
    pub ratio: f64,
}

/// Largest value over the masked nodes; ties go to the first node.
pub fn max_field(field: &ScalarField) -> Result<(Point, f64)> {
    let mut best: Option<(Point, f64)> = None;
    for (&p, &v) in field.nodes.iter().zip(&field.values) {
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((p, v)),
        }
    }
    best.ok_or(Error::EmptyField)
}

/// Smoothing radius λ N^{-1/2}.
pub fn lln_epsilon(n: usize, lambda: f64) -> f64 {
    lambda / (n as f64).sqrt()
}

/// Max of Pot_{N,ε} over D(0, r) on a lattice of spacing `spacing`
/// (ε/2 when absent), with ε = λ N^{-1/2}.
pub fn max_report(config: &Configuration, beta: f64, r: f64, lambda: f64, spacing: Option<f64>) -> Result<MaxReport> {
    let n = config.len();
    if n < 2 {
        return Err(Error::InvalidParameter("max ratio needs N >= 2".into()));
    }
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::InvalidParameter(format!("radius must lie in (0, 1), got {r}")));
    }
    if !(lambda >= 1.0) {
        return Err(Error::InvalidParameter(format!("lambda must be >= 1, got {lambda}")));
    }
    let eps = lln_epsilon(n, lambda);
    let grid = GridSpec::new(r, spacing.unwrap_or(eps / 2.0))?;
    let field = pot_field(config, eps, grid)?;
    let (argmax, value) = max_field(&field)?;
    Ok(MaxReport { argmax, value, grid, epsilon: eps, n, beta, ratio: value / (n as f64).ln() })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderRow {
    pub n: usize,
    pub replicas: usize,
    pub mean_ratio: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderResult {
    pub beta: f64,
    /// 1/√β
    pub target: f64,
    pub rows: Vec<LadderRow>,
}

pub const MIN_LADDER_REPLICAS: usize = 30;

/// Aggregates per-N max ratios into a ladder.
pub fn lln_ladder(beta: f64, ratios: &[(usize, Vec<f64>)]) -> Result<LadderResult> {
    if !(beta > 0.0) {
        return Err(Error::NonPositiveBeta(beta));
    }
    if ratios.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::InvalidParameter("ladder N values must increase".into()));
    }
    let mut rows = Vec::with_capacity(ratios.len());
    for (n, xs) in ratios {
        if xs.len() < MIN_LADDER_REPLICAS {
            return Err(Error::InsufficientReplicas { needed: MIN_LADDER_REPLICAS, got: xs.len() });
        }
        let s = summarize(xs);
        rows.push(LadderRow { n: *n, replicas: xs.len(), mean_ratio: s.mean, stderr: s.stderr });
    }
    Ok(LadderResult { beta, target: 1.0 / beta.sqrt(), rows })
}

impl LadderResult {
    /// Columns N, replicas, mean_ratio, stderr, target.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("N,replicas,mean_ratio,stderr,target\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{},{},{}\n", r.n, r.replicas, r.mean_ratio, r.stderr, self.target));
        }
        s
    }

    /// Mean ratio at the largest N exceeds that at the smallest by at least
    /// two combined standard errors.
    pub fn monotone_trend(&self) -> bool {
        match (self.rows.first(), self.rows.last()) {
            (Some(a), Some(b)) if self.rows.len() >= 2 => b.mean_ratio - a.mean_ratio >= 2.0 * a.stderr.hypot(b.stderr),
            _ => false,
        }
    }

    /// Means strictly increase along the ladder.
    pub fn increasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].mean_ratio > w[0].mean_ratio)
    }

    /// All means inside [lo, hi]·(1/√β).
    pub fn within_band(&self, lo: f64, hi: f64) -> bool {
        self.rows.iter().all(|r| r.mean_ratio >= lo * self.target && r.mean_ratio <= hi * self.target)
    }
}

/// (β, mean ratio, stderr) triples at a common N: means strictly decrease
/// in β and adjacent pairs are separated by two combined standard errors.
pub fn beta_ordering(rows: &[(f64, f64, f64)]) -> bool {
    let mut sorted = rows.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    sorted.len() >= 2
        && sorted.windows(2).all(|w| {
            let (a, b) = (w[0], w[1]);
            a.1 > b.1 && a.1 - b.1 >= 2.0 * a.2.hypot(b.2)
        })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub alpha: f64,
    pub threshold: f64,
    pub exceed: usize,
    pub replicas: usize,
    pub probability: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
}

pub const MIN_TAIL_REPLICAS: usize = 100;

/// Fraction of replicas with max ≥ α log N / √β, with a 95% Wilson interval.
pub fn tail_probability(maxima: &[MaxReport], alpha: f64, beta: f64) -> Result<TailEstimate> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    if maxima.len() < MIN_TAIL_REPLICAS {
        return Err(Error::InsufficientReplicas { needed: MIN_TAIL_REPLICAS, got: maxima.len() });
    }
    let n = maxima[0].n;
    if maxima.iter().any(|m| m.n != n) {
        return Err(Error::InvalidParameter("tail probability needs a common N".into()));
    }
    let threshold = alpha * (n as f64).ln() / beta.sqrt();
    let exceed = maxima.iter().filter(|m| m.value >= threshold).count();
    let (lo, hi) = wilson_interval(exceed, maxima.len());
    Ok(TailEstimate {
        alpha,
        threshold,
        exceed,
        replicas: maxima.len(),
        probability: exceed as f64 / maxima.len() as f64,
        wilson_lo: lo,
        wilson_hi: hi,
    })
}

/// |max at spacing h − max at spacing h/2| for one configuration.
pub fn grid_sensitivity(config: &Configuration, beta: f64, r: f64, lambda: f64, spacing: f64) -> Result<f64> {
    let coarse = max_report(config, beta, r, lambda, Some(spacing))?;
    let fine = max_report(config, beta, r, lambda, Some(spacing / 2.0))?;
    Ok((coarse.value - fine.value).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::ginibre_sample;

    fn field(values: Vec<f64>) -> ScalarField {
        let grid = GridSpec::new(1.0, 1.0).unwrap();
        let nodes = grid.nodes();
        assert_eq!(nodes.len(), values.len());
        ScalarField { grid, nodes, values }
    }

    #[test]
    fn max_of_constant_field_is_first_node() {
        let f = field(vec![2.0; 5]);
        let (p, v) = max_field(&f).unwrap();
        assert_eq!((p, v), (f.nodes[0], 2.0));
        let empty = ScalarField { grid: f.grid, nodes: vec![], values: vec![] };
        assert_eq!(max_field(&empty), Err(Error::EmptyField));
    }

    #[test]
    fn one_particle_field_peaks_at_the_particle() {
        let x = Point::new(0.213, -0.171);
        let cfg = Configuration::new(vec![x]).unwrap();
        let eps = 0.1;
        let grid = GridSpec::new(0.8, 0.02).unwrap();
        let f = pot_field(&cfg, eps, grid).unwrap();
        // a lone charge is a well of the potential
        let neg = ScalarField { values: f.values.iter().map(|v| -v).collect(), ..f.clone() };
        let (p, _) = max_field(&neg).unwrap();
        assert!(p.dist(x) <= 0.02 * std::f64::consts::SQRT_2);
        let (q, _) = max_field(&f).unwrap();
        assert!(q.norm() > 0.7);
    }

    #[test]
    fn ladder_bookkeeping() {
        let a: Vec<f64> = (0..30).map(|i| 0.5 + 0.001 * i as f64).collect();
        let b: Vec<f64> = (0..30).map(|i| 0.6 + 0.001 * i as f64).collect();
        let l = lln_ladder(2.0, &[(256, a.clone()), (1024, b.clone())]).unwrap();
        assert!(l.increasing() && l.monotone_trend());
        assert!((l.target - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(l.to_csv().starts_with("N,replicas,mean_ratio,stderr,target\n256,30,"));
        assert!(lln_ladder(2.0, &[(1024, a.clone()), (256, b)]).is_err());
        assert!(matches!(lln_ladder(2.0, &[(256, a[..10].to_vec())]), Err(Error::InsufficientReplicas { .. })));
        assert!(beta_ordering(&[(1.0, 0.9, 0.01), (4.0, 0.45, 0.01), (2.0, 0.65, 0.01)]));
        assert!(!beta_ordering(&[(1.0, 0.9, 0.1), (2.0, 0.85, 0.1)]));
    }

    #[test]
    fn tail_probability_is_monotone() {
        let reports: Vec<MaxReport> = (0..120)
            .map(|i| MaxReport {
                argmax: Point::ORIGIN,
                value: 2.0 + 0.01 * i as f64,
                grid: GridSpec::new(0.5, 0.1).unwrap(),
                epsilon: 0.2,
                n: 100,
                beta: 2.0,
                ratio: 0.0,
            })
            .collect();
        let mut last = 1.0;
        for alpha in [0.1, 0.5, 0.7, 0.9, 3.0] {
            let t = tail_probability(&reports, alpha, 2.0).unwrap();
            assert!(t.probability <= last);
            assert!(t.wilson_lo <= t.probability && t.probability <= t.wilson_hi);
            last = t.probability;
        }
        assert_eq!(tail_probability(&reports, 0.1, 2.0).unwrap().probability, 1.0);
        assert_eq!(tail_probability(&reports, 3.0, 2.0).unwrap().probability, 0.0);
        assert!(tail_probability(&reports[..50], 1.0, 2.0).is_err());
    }

    #[test]
    fn ginibre_max_is_positive_and_grid_stable() {
        let cfg = ginibre_sample(256, 4).unwrap();
        let m = max_report(&cfg, 2.0, 0.8, 4.0, None).unwrap();
        assert!(m.value > 0.0 && m.argmax.norm() <= 0.8);
        assert!(grid_sensitivity(&cfg, 2.0, 0.8, 4.0, m.epsilon / 2.0).unwrap() < 0.05 / 2f64.sqrt());
    }
}
