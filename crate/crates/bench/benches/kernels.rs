use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use plasma2d_core::gmc::{conv_log, psi_factor, CovarianceModel};
use plasma2d_core::model::pair_energy;
use plasma2d_core::potential::{mollified_log, pot_field, CenterSpec, GridSpec};
use plasma2d_core::sampler::{ginibre_sample, kostlan_radii_sq, Chain, ChainSpec, StepScale};
use plasma2d_core::{Ensemble, ModelParams, Point};

fn potential(c: &mut Criterion) {
    c.bench_function("mollified_log", |b| b.iter(|| mollified_log(black_box(0.013), black_box(0.02))));
    let mut g = c.benchmark_group("pot_field");
    g.sample_size(10);
    for n in [256, 1024] {
        let cfg = ginibre_sample(n, 1).unwrap();
        let eps = 4.0 / (n as f64).sqrt();
        let grid = GridSpec::new(0.8, eps / 2.0).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &cfg, |b, cfg| b.iter(|| pot_field(cfg, eps, grid).unwrap()));
    }
    g.finish();
    let cfg = ginibre_sample(1024, 2).unwrap();
    c.bench_function("pair_energy/1024", |b| b.iter(|| pair_energy(black_box(&cfg)).unwrap()));
}

fn samplers(c: &mut Criterion) {
    let mut g = c.benchmark_group("sampler");
    g.sample_size(10);
    g.bench_function("ginibre/256", |b| b.iter(|| ginibre_sample(256, black_box(3)).unwrap()));
    g.bench_function("kostlan/4096", |b| b.iter(|| kostlan_radii_sq(4096, black_box(3))));
    let params = ModelParams::new(256, 2.0, Ensemble::PureQuadratic).unwrap();
    let spec = ChainSpec { n_steps: 1_000_000, step_scale: StepScale::Fixed(0.05), burn_in: 0, thinning: 1, seed: 5 };
    let mut chain = Chain::new(params, spec).unwrap();
    g.bench_function("mcmc_sweep/256", |b| b.iter(|| chain.sweep()));
    g.finish();
}

fn covariance(c: &mut Criterion) {
    c.bench_function("conv_log/overlap", |b| b.iter(|| conv_log(black_box(0.03), black_box(0.05), black_box(0.05))));
    let model = CovarianceModel::new(CenterSpec::default());
    let (x, z) = (Point::new(0.1, 0.2), Point::new(-0.15, 0.05));
    model.psi_cov(x, z, 3, 3);
    c.bench_function("psi_cov/cached", |b| b.iter(|| model.psi_cov(black_box(x), black_box(z), 3, 3)));
    let nodes = GridSpec::new(0.3, 0.05).unwrap().nodes();
    let mut g = c.benchmark_group("psi_factor");
    g.sample_size(10);
    g.bench_function(format!("{}_nodes", nodes.len()), |b| b.iter(|| psi_factor(&nodes, 3, &model).unwrap()));
    g.finish();
}

criterion_group!(benches, potential, samplers, covariance);
criterion_main!(benches);
