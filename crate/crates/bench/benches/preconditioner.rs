//! Throughput of a single preconditioner application.

use blprec::krylov::Preconditioner;
use blprec::precond1d::apply_m_inverse;
use blprec::LayerCase;
use blprec_bench::{setup_1d, setup_2d};
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

fn bench_apply_1d(c: &mut Criterion) {
    let mut group = c.benchmark_group("apply_1d");
    for n in [256usize, 1024, 4096] {
        let (_, b, m) = setup_1d(1e-6, n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |bch, _| {
            bch.iter(|| apply_m_inverse(&m, black_box(&b)))
        });
    }
    group.finish();
}

fn bench_apply_2d(c: &mut Criterion) {
    let mut group = c.benchmark_group("apply_2d");
    group.sample_size(20);
    for (case, label) in [
        (LayerCase::ParabolicExponential, "parabolic"),
        (LayerCase::TwoExponential, "exponential"),
    ] {
        for n in [64usize, 128] {
            let (_, b, m, _) = setup_2d(case, 1e-6, n);
            let mut z = vec![0.0; b.len()];
            group.bench_with_input(BenchmarkId::new(label, n), &n, |bch, _| {
                bch.iter(|| m.apply(black_box(&b), &mut z))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, bench_apply_1d, bench_apply_2d);
criterion_main!(benches);
