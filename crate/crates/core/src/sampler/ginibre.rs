use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::Configuration;
use crate::linalg::{complex, hessenberg_eigenvalues};
use crate::rng::rng_from_seed;

/// Eigenvalues of an n×n complex Ginibre matrix with entry variance 1/n.
///
/// Samples the unitarily equivalent upper Hessenberg form directly: Gaussian
/// entries on and above the diagonal and real subdiagonal entries
/// sqrt(Gamma(n-1-j, 1)/n). The spectrum has the same law as that of the
/// full matrix.
pub fn ginibre_sample(n: usize, seed: u64) -> Result<Configuration> {
    if n == 0 {
        return Err(Error::InvalidParameter("matrix size must be at least 1".into()));
    }
    let mut rng = rng_from_seed(seed);
    let nf = n as f64;
    let s = (0.5 / nf).sqrt();
    let mut h = vec![complex(0.0, 0.0); n * n];
    for j in 0..n {
        for i in 0..=j {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            h[i + j * n] = complex(re * s, im * s);
        }
        if j + 1 < n {
            let g = Gamma::new((n - 1 - j) as f64, 1.0).expect("positive shape");
            let v: f64 = g.sample(&mut rng);
            h[j + 1 + j * n] = complex((v / nf).sqrt(), 0.0);
        }
    }
    Configuration::new(hessenberg_eigenvalues(&mut h, n)?)
}

/// Squared moduli of the eigenvalues of an n×n Ginibre matrix (variance
/// 1/n), as the independent family Gamma(k, 1)/n, k = 1..n.
pub fn kostlan_radii_sq(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    let nf = n as f64;
    (1..=n)
        .map(|k| {
            let g = Gamma::new(k as f64, 1.0).expect("positive shape");
            g.sample(&mut rng) / nf
        })
        .collect()
}
