//! Property tests for the structural invariants of the core crate.

use plasma2d_core::extremes::{max_field, tail_probability, MaxReport};
use plasma2d_core::gmc::{conv_log, ell, CovarianceModel};
use plasma2d_core::model::{energy_f, energy_quadratic, zeta, Density};
use plasma2d_core::potential::{bump_mass, mollified_log, pot_field, pot_reg, CenterSpec, GridSpec};
use plasma2d_core::rng::child_seed;
use plasma2d_core::sampler::{kostlan_product, mcmc_sample, Chain, radial_moment_oracle, ChainSpec, Checkpoint, StepScale};
use plasma2d_core::stats::{ks_two_sample, summarize, wilson_interval};
use plasma2d_core::{Configuration, Ensemble, ModelParams, Point};
use proptest::prelude::*;
use std::sync::OnceLock;

fn point_in(radius: f64) -> impl Strategy<Value = Point> {
    (0.0..1.0f64, 0.0..std::f64::consts::TAU).prop_map(move |(u, t)| Point::polar(radius * u.sqrt(), t))
}

fn configuration(n: std::ops::Range<usize>, radius: f64) -> impl Strategy<Value = Configuration> {
    prop::collection::vec(point_in(radius), n).prop_filter_map("coincident points", |pts| Configuration::new(pts).ok())
}

fn cov_model() -> &'static CovarianceModel {
    static MODEL: OnceLock<CovarianceModel> = OnceLock::new();
    MODEL.get_or_init(|| CovarianceModel::new(CenterSpec::default()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn splitting_constant_is_configuration_independent(cfg in configuration(2..12, 1.5)) {
        let n = cfg.len() as f64;
        let lhs = energy_f(&cfg, &Density::equilibrium()).unwrap()
            + n * cfg.iter().map(|&x| zeta(x)).sum::<f64>()
            - energy_quadratic(&cfg).unwrap();
        let expected = -3.0 * n * n / 8.0;
        prop_assert!((lhs - expected).abs() <= 1e-9 * expected.abs(), "{lhs} vs {expected}");
    }

    #[test]
    fn zeta_vanishes_exactly_on_the_closed_disk(p in point_in(3.0)) {
        let z = zeta(p);
        prop_assert!(z >= 0.0);
        if p.norm() <= 1.0 {
            prop_assert_eq!(z, 0.0);
        } else {
            prop_assert!(z > 0.0);
        }
    }

    #[test]
    fn mollified_log_dominates_log(d in 1e-6..3.0f64, eps in 1e-3..1.0f64) {
        let m = mollified_log(d, eps);
        prop_assert!(m - d.ln() >= -1e-12);
        if d >= eps {
            prop_assert!((m - d.ln()).abs() <= 1e-12);
        }
    }

    #[test]
    fn bump_mass_is_a_distribution_function(r1 in 0.0..2.0f64, r2 in 0.0..2.0f64, eps in 1e-3..1.0f64) {
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        prop_assert!(bump_mass(lo, eps) <= bump_mass(hi, eps) + 1e-15);
        prop_assert!((0.0..=1.0).contains(&bump_mass(lo, eps)));
        prop_assert_eq!(bump_mass(eps, eps), 1.0);
    }

    #[test]
    fn field_matches_pointwise_evaluation(cfg in configuration(1..20, 1.0), eps in 0.05..0.5f64) {
        let grid = GridSpec::new(0.8, eps / 2.0).unwrap();
        let f = pot_field(&cfg, eps, grid).unwrap();
        for (&p, &v) in f.nodes.iter().zip(&f.values) {
            prop_assert!(p.norm() <= 0.8 + 1e-12);
            prop_assert_eq!(v.to_bits(), pot_reg(&cfg, p, eps).unwrap().to_bits());
        }
        let (argmax, _) = max_field(&f).unwrap();
        prop_assert!(f.nodes.contains(&argmax));
    }

    #[test]
    fn checkpoint_round_trip_is_exact(cfg in configuration(1..30, 2.0), seed in any::<u64>(), sweep in any::<u64>()) {
        let cp = Checkpoint { n: cfg.len(), beta: 2.0, ensemble: "pure-quadratic".into(), sweep, seed, config: cfg };
        prop_assert_eq!(Checkpoint::from_csv(&cp.to_csv()).unwrap(), cp);
    }

    #[test]
    fn child_seeds_are_deterministic_and_distinct(master in any::<u64>(), i in 0..1_000_000u64, j in 0..1_000_000u64) {
        prop_assert_eq!(child_seed(master, i), child_seed(master, i));
        if i != j {
            prop_assert_ne!(child_seed(master, i), child_seed(master, j));
        }
    }

    #[test]
    fn kostlan_product_matches_radial_oracle(n in 1..40usize, frac in 0.01..0.9f64) {
        let t = frac * n as f64;
        let a = radial_moment_oracle(n, 2.0, t).unwrap();
        let b = kostlan_product(n, t);
        // both overflow together once the moment leaves f64 range
        prop_assert_eq!(a.is_finite(), b.is_finite());
        if b.is_finite() {
            prop_assert!((a / b - 1.0).abs() <= 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn non_positive_beta_is_rejected(beta in -5.0..=0.0f64, n in 1..100usize) {
        prop_assert!(ModelParams::new(n, beta, Ensemble::CanonicalF).is_err());
    }

    #[test]
    fn wilson_interval_brackets_the_proportion(n in 1..10_000usize, frac in 0.0..=1.0f64) {
        let k = ((n as f64) * frac).floor() as usize;
        let (lo, hi) = wilson_interval(k, n);
        let p = k as f64 / n as f64;
        prop_assert!(0.0 <= lo && lo <= p + 1e-12 && p <= hi + 1e-12 && hi <= 1.0);
    }

    #[test]
    fn summaries_and_ks_are_well_formed(a in prop::collection::vec(-10.0..10.0f64, 2..200), b in prop::collection::vec(-10.0..10.0f64, 2..200)) {
        let s = summarize(&a);
        prop_assert!(s.stderr >= 0.0 && s.variance >= 0.0);
        let ks = ks_two_sample(&a, &b);
        prop_assert!((0.0..=1.0).contains(&ks.statistic) && (0.0..=1.0).contains(&ks.p_value));
    }

    #[test]
    fn tail_probability_decreases_in_alpha(values in prop::collection::vec(0.0..10.0f64, 100..150), a1 in 0.01..5.0f64, a2 in 0.01..5.0f64) {
        let grid = GridSpec::new(0.5, 0.1).unwrap();
        let reports: Vec<MaxReport> = values
            .iter()
            .map(|&v| MaxReport { argmax: Point::ORIGIN, value: v, grid, epsilon: 0.1, n: 1024, beta: 2.0, ratio: v / 1024f64.ln() })
            .collect();
        let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
        let p_lo = tail_probability(&reports, lo, 2.0).unwrap().probability;
        let p_hi = tail_probability(&reports, hi, 2.0).unwrap().probability;
        prop_assert!(p_hi <= p_lo);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn conv_log_is_symmetric_and_newtonian(d in 0.0..1.5f64, a in 0.01..0.5f64, b in 0.01..0.5f64) {
        let (ab, ba) = (conv_log(d, a, b), conv_log(d, b, a));
        prop_assert!((ab - ba).abs() <= 1e-9 * ab.abs().max(1.0));
        if d >= a + b {
            prop_assert!((ab - d.ln()).abs() <= 1e-10);
        }
    }

    #[test]
    fn covariance_is_symmetric(x in point_in(0.8), z in point_in(0.8), k in 1..5u32, n in 1..5u32) {
        let m = cov_model();
        let (xz, zx) = (m.psi_cov(x, z, k, n), m.psi_cov(z, x, n, k));
        prop_assert!((xz - zx).abs() <= 1e-10 * xz.abs().max(1.0));
    }

    #[test]
    fn covariance_reduces_to_the_kernel_when_separated(x in point_in(0.95), z in point_in(0.95), k in 2..5u32, n in 2..5u32) {
        let m = cov_model();
        let r = m.center.r_chi;
        prop_assume!(x.dist(z) >= ell(k) + ell(n));
        prop_assume!(x.norm() >= r + ell(k) && z.norm() >= r + ell(n));
        prop_assert!((m.psi_cov(x, z, k, n) - m.kernel(x, z)).abs() <= 1e-8);
    }

    #[test]
    fn chain_diagnostics_are_bounded(n in 2..8usize, beta in 0.5..4.0f64, seed in any::<u64>()) {
        let params = ModelParams::new(n, beta, Ensemble::PureQuadratic).unwrap();
        let spec = ChainSpec { n_steps: 400, step_scale: StepScale::Auto, burn_in: 100, thinning: 3, seed };
        let (cfgs, d) = mcmc_sample(params, spec).unwrap();
        prop_assert_eq!(cfgs.len() as u64, spec.retained());
        prop_assert!((0.0..=1.0).contains(&d.acceptance_rate));
        prop_assert!(d.ess_energy <= d.retained as f64 + 1e-9);
    }

    #[test]
    fn incremental_energy_deltas_match_full_recomputation(n in 2..10usize, beta in 0.5..4.0f64, seed in any::<u64>(), canonical in any::<bool>()) {
        let ensemble = if canonical { Ensemble::CanonicalF } else { Ensemble::PureQuadratic };
        let params = ModelParams::new(n, beta, ensemble).unwrap();
        let spec = ChainSpec { n_steps: 300, step_scale: StepScale::Auto, burn_in: 50, thinning: 1, seed };
        let d = Chain::new(params, spec).unwrap().with_audit(97).run(|_, _, _| {}).unwrap();
        prop_assert!(d.audit_checks > 0);
        prop_assert!(d.audit_max_discrepancy <= 1e-9, "{}", d.audit_max_discrepancy);
    }
}
