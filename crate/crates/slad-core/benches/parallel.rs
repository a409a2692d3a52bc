//! Parallel vs sequential kernels. With the default `parallel` feature the
//! dispatching entry points run on rayon; the `_seq` references always run
//! single-threaded, so a default build shows the speedup and a
//! `--no-default-features` build shows the two paths coincide.

use criterion::{black_box, criterion_group, criterion_main, Criterion};

use slad_core::data::{Dataset, DatasetConfig};
use slad_core::metrics::{energy_distance, energy_distance_seq};
use slad_core::parallel::{map_indexed, map_indexed_seq};
use slad_core::rng;
use slad_core::tensor::{matmul, matmul_seq, Tensor};

fn bench_matmul(c: &mut Criterion) {
    let mut r = rng::root(1);
    let a = Tensor::randn(vec![128, 128], &mut r);
    let b = Tensor::randn(vec![128, 128], &mut r);
    let mut g = c.benchmark_group("matmul_128");
    g.bench_function("dispatch", |bench| {
        bench.iter(|| black_box(matmul(black_box(&a), black_box(&b))))
    });
    g.bench_function("sequential", |bench| {
        bench.iter(|| black_box(matmul_seq(black_box(&a), black_box(&b))))
    });
    g.finish();
}

fn bench_energy_distance(c: &mut Criterion) {
    let mut r = rng::root(2);
    let x = Tensor::randn(vec![1000, 2], &mut r);
    let y = Tensor::randn(vec![1000, 2], &mut r);
    let mut g = c.benchmark_group("energy_distance_1000");
    g.sample_size(20);
    g.bench_function("dispatch", |bench| {
        bench.iter(|| black_box(energy_distance(black_box(&x), black_box(&y))))
    });
    g.bench_function("sequential", |bench| {
        bench.iter(|| black_box(energy_distance_seq(black_box(&x), black_box(&y))))
    });
    g.finish();
}

fn bench_batch_sampling(c: &mut Criterion) {
    let ds = Dataset::new(&DatasetConfig::default()).unwrap();
    let mut g = c.benchmark_group("mixture_batch_4096");
    g.bench_function("dispatch", |bench| {
        bench.iter(|| black_box(ds.batch(black_box(7), 0, 4096)))
    });
    g.bench_function("sequential", |bench| {
        bench.iter(|| {
            let rows = map_indexed_seq(4096, |i| ds.sample(7, i as u64));
            black_box(rows)
        })
    });
    g.finish();
}

fn bench_monte_carlo_perturb(c: &mut Criterion) {
    let sched = slad_core::schedule::make_schedule(1000, 1e-4, 0.02).unwrap();
    let x0 = Tensor::vector(vec![0.4, -0.4]);
    let draw = |i: usize| {
        let mut r = rng::stream(3, i as u64);
        let eps = Tensor::randn(vec![2], &mut r);
        sched.perturb(&x0, 500, &eps).data()[0]
    };
    let mut g = c.benchmark_group("monte_carlo_perturb_20000");
    g.bench_function("dispatch", |bench| {
        bench.iter(|| black_box(map_indexed(20_000, draw)))
    });
    g.bench_function("sequential", |bench| {
        bench.iter(|| black_box(map_indexed_seq(20_000, draw)))
    });
    g.finish();
}

criterion_group!(
    benches,
    bench_matmul,
    bench_energy_distance,
    bench_batch_sampling,
    bench_monte_carlo_perturb
);
criterion_main!(benches);
