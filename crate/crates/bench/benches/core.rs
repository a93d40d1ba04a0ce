use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uplift_core::base::{fit_gbdt, GbtConfig};
use uplift_core::metrics::{evaluate, QiniBaseline};
use uplift_core::NeighborIndex;

fn uniform(n: usize, d: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((n, d), |_| rng.random::<f64>())
}

fn metrics(c: &mut Criterion) {
    let mut group = c.benchmark_group("evaluate");
    for n in [2_400usize, 19_200] {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tau_hat: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let tau: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let t: Vec<f64> = (0..n).map(|_| f64::from(rng.random_bool(0.5))).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| evaluate(black_box(&tau_hat), Some(&tau), &t, &y, 0.3, QiniBaseline::Diagonal).unwrap())
        });
    }
    group.finish();
}

fn neighbors(c: &mut Criterion) {
    let mut group = c.benchmark_group("neighbor_index");
    group.sample_size(10);
    for n in [8_000usize, 64_000] {
        let x = uniform(n, 8, 2);
        group.bench_with_input(BenchmarkId::from_parameter(n), &x, |b, x| b.iter(|| NeighborIndex::build(black_box(x), 0.1)));
    }
    group.finish();
}

fn gbdt(c: &mut Criterion) {
    let x = uniform(4_000, 8, 3);
    let y: Vec<f64> = x.rows().into_iter().map(|r| r[0] * 3.0 + (r[1] * 6.0).sin()).collect();
    let cfg = GbtConfig::default();
    let mut group = c.benchmark_group("gbdt_fit");
    group.sample_size(10);
    group.bench_function("n4000_d8", |b| b.iter(|| fit_gbdt(black_box(x.view()), &y, None, &cfg, 0).unwrap()));
    group.finish();
}

criterion_group!(benches, metrics, neighbors, gbdt);
criterion_main!(benches);
