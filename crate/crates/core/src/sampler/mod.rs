//! Sampling the Gibbs measure: Metropolis chains at any β and the exact
//! eigenvalue route at β = 2, with closed-form oracles.

mod checkpoint;
mod ginibre;
mod mcmc;

pub use checkpoint::Checkpoint;
pub use ginibre::{ginibre_sample, kostlan_radii_sq};
pub use mcmc::{
    chain_diagnostics, mcmc_sample, one_particle_moment2, Chain, ChainDiagnostics, ChainSpec, ProposalLog,
    StepScale, INDEPENDENCE_EVERY, INDEPENDENCE_RADIUS, TARGET_ACCEPTANCE,
};

use crate::error::{Error, Result};
use crate::geometry::{Configuration, Point};
use crate::stats::{mean, variance};

/// E[exp(t Σ|x_i|²)] under the pure quadratic ensemble:
/// (1 - 2t/(βN))^{-(N + βN(N-1)/4)}.
pub fn radial_moment_oracle(n: usize, beta: f64, t: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::NonPositiveBeta(beta));
    }
    let nf = n as f64;
    let limit = beta * nf / 2.0;
    if t >= limit {
        return Err(Error::DomainError { t, limit });
    }
    let exponent = nf + beta * nf * (nf - 1.0) / 4.0;
    Ok((-exponent * (-2.0 * t / (beta * nf)).ln_1p()).exp())
}

/// Π_{k=1..N} (1 - t/N)^{-k}, the β = 2 value of the moment above.
pub fn kostlan_product(n: usize, t: f64) -> f64 {
    let base = 1.0 / (1.0 - t / n as f64);
    let mut out = 1.0;
    let mut pow = 1.0;
    for _ in 1..=n {
        pow *= base;
        out *= pow;
    }
    out
}

/// Mean and unbiased variance of the number of points in the closed disk
/// D(z, ell) across configurations.
pub fn count_stats(configs: &[Configuration], z: Point, ell: f64) -> (f64, f64) {
    let counts: Vec<f64> = configs.iter().map(|c| c.count_in_disk(z, ell) as f64).collect();
    (mean(&counts), variance(&counts))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_edge_cases() {
        assert_eq!(radial_moment_oracle(16, 2.0, 0.0).unwrap(), 1.0);
        assert!(matches!(radial_moment_oracle(16, 2.0, 16.0), Err(Error::DomainError { .. })));
        assert!(matches!(radial_moment_oracle(4, 0.0, 0.1), Err(Error::NonPositiveBeta(_))));
    }

    #[test]
    fn oracle_matches_product_at_beta_two() {
        for (n, t) in [(16, 1.0), (5, -2.0), (40, 3.5)] {
            let a = radial_moment_oracle(n, 2.0, t).unwrap();
            let b = kostlan_product(n, t);
            assert!(((a - b) / b).abs() < 1e-12, "{a} {b}");
        }
    }

    #[test]
    fn oracle_derivative_at_zero() {
        for (n, beta) in [(16usize, 2.0), (64, 1.0), (10, 4.0)] {
            let h = 1e-6;
            let d = (radial_moment_oracle(n, beta, h).unwrap() - radial_moment_oracle(n, beta, -h).unwrap()) / (2.0 * h);
            let expect = (n as f64 - 1.0) / 2.0 + 2.0 / beta;
            assert!((d - expect).abs() < 1e-5 * expect, "{d} {expect}");
        }
    }

    #[test]
    fn ginibre_single_entry_is_exponential() {
        let v: Vec<f64> = (0..20000).map(|s| ginibre_sample(1, s).unwrap().moment2()).collect();
        let m = mean(&v);
        let se = (variance(&v) / v.len() as f64).sqrt();
        assert!((m - 1.0).abs() < 3.0 * se, "{m} ± {se}");
        assert!((variance(&v) - 1.0).abs() < 0.1);
    }

    #[test]
    fn ginibre_is_reproducible_and_confined() {
        let a = ginibre_sample(256, 5).unwrap();
        assert_eq!(a, ginibre_sample(256, 5).unwrap());
        assert_eq!(a.len(), 256);
        let outside = a.iter().filter(|p| p.norm() > 1.2).count();
        assert!(outside < 3);
    }

    #[test]
    fn kostlan_moduli_mean() {
        let n = 32;
        let v: Vec<f64> = (0..4000).map(|s| kostlan_radii_sq(n, s).iter().sum()).collect();
        let m = mean(&v);
        let se = (variance(&v) / v.len() as f64).sqrt();
        assert!((m - (n as f64 + 1.0) / 2.0).abs() < 3.0 * se);
    }

    #[test]
    fn count_stats_of_fixed_configs() {
        let a = Configuration::from_xy(&[(0.0, 0.0), (0.4, 0.0), (0.9, 0.0)]).unwrap();
        let b = Configuration::from_xy(&[(0.0, 0.1), (0.6, 0.0), (0.9, 0.0)]).unwrap();
        let (m, v) = count_stats(&[a, b], Point::ORIGIN, 0.5);
        assert_eq!(m, 1.5);
        assert_eq!(v, 0.5);
    }
}
