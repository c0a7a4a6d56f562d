use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use charflow::dynamics::{integrate_characteristic, Parametrization};
use charflow::invariants::{certify_contact, linking_number};
use charflow::{Point, Scheme};
use charflow_bench::{hyperbolic, sphere, torus};

fn quadrature(c: &mut Criterion) {
    let mut g = c.benchmark_group("linking_number");
    let t3 = torus();
    for n in [16, 32] {
        g.bench_with_input(BenchmarkId::new("t3_grid", n), &n, |b, &n| {
            b.iter(|| linking_number(&t3, Scheme::Grid { resolution: n }).unwrap())
        });
    }
    let s3 = sphere();
    g.bench_function("sphere_mc_1e5", |b| {
        b.iter(|| linking_number(&s3, Scheme::MonteCarlo { samples: 100_000, seed: 1 }).unwrap())
    });
    g.finish();
}

fn integrator(c: &mut Criterion) {
    let mut g = c.benchmark_group("integrate");
    let s3 = sphere();
    let p = Point::new(0.6, 0.0, 0.0, 0.8);
    g.bench_function("sphere_t100", |b| {
        b.iter(|| integrate_characteristic(&s3, &p, 100.0, 1e-8, Parametrization::CharacteristicField).unwrap())
    });
    let h = hyperbolic(1.0);
    let q = h.sample_points(1, 3)[0];
    g.bench_function("hyperbolic_t100", |b| {
        b.iter(|| integrate_characteristic(&h, &q, 100.0, 1e-8, Parametrization::CharacteristicField).unwrap())
    });
    g.finish();
}

fn lp(c: &mut Criterion) {
    let mut g = c.benchmark_group("certify");
    g.sample_size(10);
    let t3 = torus();
    g.bench_function("t3_cap2_1024", |b| b.iter(|| certify_contact(&t3, 2, 1024, 0).unwrap()));
    g.finish();
}

criterion_group!(benches, quadrature, integrator, lp);
criterion_main!(benches);
