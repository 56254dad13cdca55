use std::hint::black_box;

use anisorb::metric::MetricTensor;
use anisorb::online::{local_sample_set, online_solve};
use anisorb::ortho::orthonormalize;
use anisorb::{MetricField, ParameterPoint};
use anisorb_bench::{galerkin_bundle, gram, random_points};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn orthonormalization(c: &mut Criterion) {
    let mut g = c.benchmark_group("orthonormalize");
    for n in [5, 10, 20, 40] {
        let m = gram(n, n as u64);
        g.bench_with_input(BenchmarkId::from_parameter(n), &m, |b, m| b.iter(|| orthonormalize(black_box(m)).unwrap()));
    }
    g.finish();
}

fn neighbour_search(c: &mut Criterion) {
    let mut g = c.benchmark_group("local_sample_set");
    let origin = ParameterPoint::new(vec![0.0, 0.0]);
    let fields = [
        ("isotropic", MetricField::identity(origin.clone())),
        ("anisotropic", MetricField::uniform(origin, MetricTensor::diagonal(&[100.0, 1.0]), 1.0)),
    ];
    for k in [1000, 10_000] {
        let samples = random_points(k, 1);
        let query = ParameterPoint::new(vec![0.1, -0.3]);
        for (name, field) in &fields {
            g.bench_function(BenchmarkId::new(*name, k), |b| {
                b.iter(|| local_sample_set(black_box(&query), &samples, 20, field))
            });
        }
    }
    g.finish();
}

fn galerkin_online(c: &mut Criterion) {
    let bundle = galerkin_bundle();
    let mu = ParameterPoint::new(vec![-1.3, 0.2]);
    c.bench_function("online_solve/galerkin", |b| {
        b.iter(|| online_solve(&bundle, black_box(&mu), bundle.n_local, None).unwrap())
    });
}

criterion_group!(benches, orthonormalization, neighbour_search, galerkin_online);
criterion_main!(benches);
