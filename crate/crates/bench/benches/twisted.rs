use criterion::{criterion_group, criterion_main, Criterion};
use ftwist_bench::fixture;
use ftwist_core::finsler::{FinslerPoint, NumericPlan};
use ftwist_core::verify::verify_entry;
use ftwist_core::{catalog_entry, VerifyOptions};

fn spray(c: &mut Criterion) {
    let (t, s) = fixture("randers-randers");
    let plan = NumericPlan::default();
    let mut g = c.benchmark_group("spray");
    g.bench_function("closed form", |b| b.iter(|| t.point(&s.x, &s.y, &plan).unwrap().spray().unwrap()));
    g.bench_function("oracle", |b| b.iter(|| FinslerPoint::at(&t, &s, &plan).unwrap().spray().unwrap()));
    g.finish();
}

fn berwald(c: &mut Criterion) {
    let (t, s) = fixture("randers-randers");
    let plan = NumericPlan::default();
    let mut g = c.benchmark_group("berwald");
    g.sample_size(10);
    g.bench_function("closed form", |b| b.iter(|| t.point(&s.x, &s.y, &plan).unwrap().berwald_blocks().unwrap()));
    g.bench_function("oracle", |b| b.iter(|| FinslerPoint::at(&t, &s, &plan).unwrap().berwald_curvature().unwrap()));
    g.finish();
}

fn verify(c: &mut Criterion) {
    let spec = catalog_entry("randers-sphere").unwrap();
    let opts = VerifyOptions {
        samples: 2,
        third_order_samples: 1,
        curvature_samples: 0,
        ..VerifyOptions::default()
    };
    let mut g = c.benchmark_group("verify");
    g.sample_size(10);
    g.bench_function("entry", |b| b.iter(|| verify_entry(&spec, &opts).unwrap()));
    g.finish();
}

criterion_group!(benches, spray, berwald, verify);
criterion_main!(benches);
