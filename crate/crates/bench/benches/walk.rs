use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use quasiwalk_bench::lattice;
use quasiwalk_core::walk::{heat_kernel_evolve, simulate_ensemble};
use quasiwalk_core::{EnsembleConfig, Starts, WalkGraph};

fn kernel(c: &mut Criterion) {
    let lat = lattice(140.0);
    let x0 = lat.nearest_vertex([0.0, 0.0]);
    let mut group = c.benchmark_group("heat_kernel_evolve");
    group.sample_size(10);
    for n in [256usize, 1024] {
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| heat_kernel_evolve(&lat, black_box(x0), &[n], 1e-9).unwrap())
        });
    }
    group.finish();
}

fn ensemble(c: &mut Criterion) {
    let lat = lattice(160.0);
    let starts = Starts::Uniform(lat.interior_within(10.0));
    let mut group = c.benchmark_group("simulate_ensemble");
    group.sample_size(10);
    for samples in [1000usize, 10_000] {
        let cfg = EnsembleConfig::new(256, samples, 7);
        group.bench_with_input(BenchmarkId::from_parameter(samples), &cfg, |b, cfg| {
            b.iter(|| simulate_ensemble(&lat, &starts, black_box(cfg)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, kernel, ensemble);
criterion_main!(benches);
