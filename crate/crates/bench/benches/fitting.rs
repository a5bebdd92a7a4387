use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lcmort_bench::synthetic_surface;
use lcmort_core::{
    estimate_drift, fit_negbin, fit_poisson, forecast::forecast_kappa_serial, forecast_kappa,
    Distribution, FitConfig,
};
use std::hint::black_box;

// Poland-sized problem: ages 0..=100 over 51 years.
const AGES: usize = 101;
const YEARS: usize = 51;

fn fits(c: &mut Criterion) {
    let config = FitConfig::default();
    let mut group = c.benchmark_group("fit");
    group.sample_size(10);
    let poisson = synthetic_surface(AGES, YEARS, Distribution::Poisson);
    group.bench_function("lee_carter_poisson", |b| {
        b.iter(|| fit_poisson(black_box(&poisson), &config).unwrap())
    });
    let negbin = synthetic_surface(AGES, YEARS, Distribution::NegativeBinomial);
    group.bench_function("lee_carter_negbin", |b| {
        b.iter(|| fit_negbin(black_box(&negbin), &config).unwrap())
    });
    group.finish();
}

fn forecasts(c: &mut Criterion) {
    let surface = synthetic_surface(AGES, YEARS, Distribution::Poisson);
    let (params, _) = fit_poisson(&surface, &FitConfig::default()).unwrap();
    let drift = estimate_drift(&params.kappa).unwrap();
    let mut group = c.benchmark_group("forecast_kappa");
    for paths in [1_000usize, 10_000] {
        group.bench_with_input(BenchmarkId::new("parallel", paths), &paths, |b, &n| {
            b.iter(|| forecast_kappa(&params.kappa, &drift, 20, n, 1).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("serial", paths), &paths, |b, &n| {
            b.iter(|| forecast_kappa_serial(&params.kappa, &drift, 20, n, 1).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, fits, forecasts);
criterion_main!(benches);
