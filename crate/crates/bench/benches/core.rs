use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fieldclt_bench::{ma_spec, random_step};
use fieldclt_core::dspace::{billingsley_d0_upper, modulus_w, modulus_wprime, CandidateSet};
use fieldclt_core::martdecomp::decompose;
use fieldclt_core::sheet::{sample_fdd, sample_sheet};
use fieldclt_core::sumproc::partial_sums;
use fieldclt_core::FddSpec;

fn fields(c: &mut Criterion) {
    let spec = ma_spec();
    let mut g = c.benchmark_group("field");
    for n in [64usize, 256] {
        g.bench_with_input(BenchmarkId::new("sample", n), &n, |b, &n| {
            b.iter(|| spec.sample(n, n, black_box(7)).unwrap())
        });
        let field = spec.sample(n, n, 7).unwrap();
        g.bench_with_input(BenchmarkId::new("partial_sums", n), &field, |b, f| {
            b.iter(|| partial_sums(black_box(f)))
        });
    }
    let field = spec.sample(128, 128, 3).unwrap();
    g.bench_function("decompose/128", |b| b.iter(|| decompose(black_box(&field)).unwrap()));
    g.finish();
}

fn moduli(c: &mut Criterion) {
    let x = random_step(8, 1);
    let big = random_step(64, 2);
    let mut g = c.benchmark_group("moduli");
    g.bench_function("w/64", |b| b.iter(|| modulus_w(black_box(&big), 0.1).unwrap()));
    g.bench_function("wprime_exhaustive/8", |b| {
        b.iter(|| modulus_wprime(black_box(&x), 0.2).unwrap())
    });
    g.bench_function("wprime_descent/64", |b| {
        b.iter(|| modulus_wprime(black_box(&big), 0.1).unwrap())
    });
    g.finish();
}

fn metrics(c: &mut Criterion) {
    let x = random_step(8, 3);
    let y = random_step(8, 4);
    let cands = CandidateSet::exhaustive(4).unwrap();
    c.bench_function("d0_upper/exhaustive4", |b| {
        b.iter(|| billingsley_d0_upper(black_box(&x), black_box(&y), &cands).unwrap())
    });
}

fn sheet(c: &mut Criterion) {
    let spec = FddSpec::new(vec![(0.5, 0.5), (1.0, 0.5), (0.5, 1.0), (1.0, 1.0)]).unwrap();
    c.bench_function("sheet/fdd_10k", |b| b.iter(|| sample_fdd(&spec, 10_000, black_box(5)).unwrap()));
    c.bench_function("sheet/path_128", |b| b.iter(|| sample_sheet(128, black_box(5)).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = fields, moduli, metrics, sheet
}
criterion_main!(benches);
