use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use quasiwalk_bench::patch;
use quasiwalk_core::{build_dual, generate_patch, GridParams};

fn generate(c: &mut Criterion) {
    let params = GridParams::default();
    let mut group = c.benchmark_group("generate_patch");
    group.sample_size(10);
    for r in [50.0, 100.0, 200.0] {
        group.bench_with_input(BenchmarkId::from_parameter(r), &r, |b, &r| {
            b.iter(|| generate_patch(black_box(r), &params).unwrap())
        });
    }
    group.finish();
}

fn dual(c: &mut Criterion) {
    let mut group = c.benchmark_group("build_dual");
    group.sample_size(10);
    for r in [50.0, 100.0, 200.0] {
        let p = patch(r);
        group.bench_with_input(BenchmarkId::from_parameter(r), &p, |b, p| {
            b.iter(|| build_dual(black_box(p)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, generate, dual);
criterion_main!(benches);
