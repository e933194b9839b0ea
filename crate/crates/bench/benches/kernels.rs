use std::hint::black_box;

use convexify_core::coefficient::{Coefficient, TestCase};
use convexify_core::experiment::{forward_grid, prepare, ExperimentConfig};
use convexify_core::forward::solve_forward_fd;
use convexify_core::metric::EnergyMetric;
use convexify_core::objective::{grad_j, j_value, InverseConfig};
use convexify_core::optimizer::initial_guess;
use convexify_core::preprocess::{EndConditions, SmoothingSpline};
use convexify_core::transform::u_to_w;
use criterion::{criterion_group, criterion_main, Criterion};

fn kernels(c: &mut Criterion) {
    let coefficient = Coefficient::Test(TestCase::One);
    let grid = forward_grid();
    c.bench_function("forward_fd_1024", |b| b.iter(|| solve_forward_fd(black_box(&coefficient), &grid).unwrap()));

    let prepared = prepare(&ExperimentConfig::test(TestCase::One, 0.1, 1)).unwrap();
    let cfg = InverseConfig::default();
    let w0 = initial_guess(&prepared.boundary, &cfg.grid).unwrap();
    c.bench_function("j_value", |b| b.iter(|| j_value(black_box(&w0), &cfg)));
    c.bench_function("grad_j", |b| b.iter(|| grad_j(black_box(&w0), &prepared.boundary, &cfg).unwrap()));

    c.bench_function("energy_metric_factor", |b| b.iter(|| EnergyMetric::new(black_box(&cfg))));
    let metric = EnergyMetric::new(&cfg);
    let grad = grad_j(&w0, &prepared.boundary, &cfg).unwrap();
    c.bench_function("energy_metric_riesz", |b| b.iter(|| metric.riesz(black_box(&grad))));

    let f0 = &prepared.noisy.f0;
    c.bench_function("spline_fit_gcv", |b| {
        b.iter(|| SmoothingSpline::fit_gcv(black_box(f0), EndConditions::start_value(0.5)).unwrap())
    });

    let target = InverseConfig::default_grid();
    c.bench_function("u_to_w", |b| b.iter(|| u_to_w(black_box(&prepared.u), &target).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = kernels
}
criterion_main!(benches);
