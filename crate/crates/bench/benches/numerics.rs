use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use qdeform::algebra::log_delta_table;
use qdeform::estimation::classical_fisher;
use qdeform::montecarlo::{mle_epsilon, sample_counts};
use qdeform::states::{distribution, DEFAULT_TOL};
use qdeform::{DeformationKind, DerivativeConfig, ProbeSpec};
use qdeform_bench::{params, probes};

fn bench_log_delta(c: &mut Criterion) {
    let mut group = c.benchmark_group("log_delta_table");
    for kind in [DeformationKind::M, DeformationKind::P] {
        let p = params(kind, 1e-3);
        for len in [100usize, 10_000] {
            group.bench_with_input(BenchmarkId::new(kind.to_string(), len), &len, |b, &len| {
                b.iter(|| log_delta_table(black_box(&p), len))
            });
        }
    }
    group.finish();
}

fn bench_distribution(c: &mut Criterion) {
    let mut group = c.benchmark_group("distribution");
    let p = params(DeformationKind::P, 1e-2);
    for (class, spec) in probes(20.0) {
        group.bench_function(format!("{class:?}"), |b| {
            b.iter(|| distribution(black_box(&spec), &p, DEFAULT_TOL).unwrap())
        });
    }
    group.finish();
}

fn bench_fisher(c: &mut Criterion) {
    let mut group = c.benchmark_group("classical_fisher");
    let cfg = DerivativeConfig::default();
    let fd = DerivativeConfig::finite_difference();
    let p = params(DeformationKind::M, 1e-3);
    for (class, spec) in probes(20.0) {
        group.bench_function(format!("{class:?}/analytic"), |b| {
            b.iter(|| classical_fisher(black_box(&spec), &p, &cfg).unwrap())
        });
        group.bench_function(format!("{class:?}/finite_difference"), |b| {
            b.iter(|| classical_fisher(black_box(&spec), &p, &fd).unwrap())
        });
    }
    group.finish();
}

fn bench_mle(c: &mut Criterion) {
    let spec = ProbeSpec::thermal_from_mean(20.0).unwrap();
    let dist = distribution(&spec, &params(DeformationKind::M, 5e-3), DEFAULT_TOL).unwrap();
    let sample = sample_counts(&dist, 10_000, 7).unwrap();
    c.bench_function("mle_epsilon/thermal_n20", |b| {
        b.iter(|| {
            mle_epsilon(black_box(&sample), &spec, DeformationKind::M, (-0.02, 0.03)).unwrap()
        })
    });
}

criterion_group!(
    benches,
    bench_log_delta,
    bench_distribution,
    bench_fisher,
    bench_mle
);
criterion_main!(benches);
