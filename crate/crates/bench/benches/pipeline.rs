//! Pipeline benchmarks at desk scale: the exact torus pairing, the canonical
//! kernel construction, the feasibility solver and transfer evaluation.

use agler_core::modelspace::canonical_kernels;
use agler_core::realization::{canonical_colligation, transfer_eval};
use agler_core::{corpus, sdpsplit, torus, BiPoly, Tolerances, C64};
use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

fn bench_pairing(c: &mut Criterion) {
    let p = corpus::flagship_denominator();
    let q = BiPoly::from_grid(vec![vec![C64::new(1.0, 0.0)], vec![C64::new(-1.0, 0.0)]]).unwrap();
    c.bench_function("h2_pair flagship norm", |b| {
        b.iter(|| torus::h2_pair(black_box(&q), black_box(&q), black_box(&p), (0, 0)).unwrap())
    });
}

fn bench_canonical(c: &mut Criterion) {
    let tols = Tolerances::default();
    let phi = corpus::flagship();
    c.bench_function("canonical_kernels flagship", |b| {
        b.iter(|| canonical_kernels(black_box(&phi), &tols).unwrap())
    });
}

fn bench_dykstra(c: &mut Criterion) {
    let phi = corpus::flagship();
    let opts = sdpsplit::DykstraOpts::default();
    c.bench_function("dykstra flagship", |b| {
        b.iter(|| sdpsplit::solve(black_box(&phi), None, &opts).unwrap())
    });
}

fn bench_realization(c: &mut Criterion) {
    let tols = Tolerances::default();
    let phi = corpus::flagship();
    let col = canonical_colligation(&phi, &tols).unwrap();
    c.bench_function("canonical_colligation flagship", |b| {
        b.iter(|| canonical_colligation(black_box(&phi), &tols).unwrap())
    });
    c.bench_function("transfer_eval", |b| {
        b.iter(|| {
            transfer_eval(black_box(&col), (C64::new(0.3, 0.2), C64::new(-0.4, 0.1))).unwrap()
        })
    });
}

criterion_group!(
    benches,
    bench_pairing,
    bench_canonical,
    bench_dykstra,
    bench_realization
);
criterion_main!(benches);
