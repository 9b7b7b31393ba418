use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use cvlab::expm::{expm_multiply, LinearCombination};
use cvlab::fockspace::{squeeze_generator, FockSpace, StateVector};
use cvlab::kernels;
use num_complex::Complex64;

fn two_mode(dim: usize) -> (FockSpace, StateVector) {
    let s = FockSpace::new(&[dim, dim]).unwrap();
    let psi = StateVector::coherent(&s, &[Complex64::new(0.8, 0.1), Complex64::new(-0.3, 0.5)]).unwrap();
    (s, psi)
}

fn matvec(c: &mut Criterion) {
    let mut group = c.benchmark_group("matvec");
    for dim in [40, 100, 200] {
        let (s, psi) = two_mode(dim);
        let g = squeeze_generator(&s, &[0, 1], Complex64::new(0.7, 0.2)).unwrap();
        let m = g.matrix();
        let x = psi.amplitudes();
        let mut y = vec![Complex64::new(0.0, 0.0); x.len()];
        group.bench_with_input(BenchmarkId::new("sequential", dim * dim), &dim, |b, _| {
            b.iter(|| m.matvec_seq(black_box(x), &mut y))
        });
        #[cfg(feature = "parallel")]
        group.bench_with_input(BenchmarkId::new("parallel", dim * dim), &dim, |b, _| {
            b.iter(|| m.matvec_par(black_box(x), &mut y))
        });
    }
    group.finish();
}

fn dot(c: &mut Criterion) {
    let mut group = c.benchmark_group("dot");
    for dim in [100, 400] {
        let (_, psi) = two_mode(dim);
        let x = psi.amplitudes();
        group.bench_with_input(BenchmarkId::new("sequential", dim * dim), &dim, |b, _| {
            b.iter(|| kernels::dot_seq(black_box(x), black_box(x)))
        });
        #[cfg(feature = "parallel")]
        group.bench_with_input(BenchmarkId::new("parallel", dim * dim), &dim, |b, _| {
            b.iter(|| kernels::dot_par(black_box(x), black_box(x)))
        });
    }
    group.finish();
}

fn expm_step(c: &mut Criterion) {
    let (s, psi) = two_mode(100);
    let g = squeeze_generator(&s, &[0, 1], Complex64::new(1.0, 0.0)).unwrap();
    let m = g.matrix();
    let op = LinearCombination::new(vec![(Complex64::new(1.0, 0.0), m)], vec![m.norm_one()]);
    c.bench_function("expm_multiply/100x100", |b| {
        b.iter(|| expm_multiply(&op, Complex64::new(1e-3, 0.0), black_box(psi.amplitudes()), 1e-12).unwrap())
    });
}

criterion_group!(benches, matvec, dot, expm_step);
criterion_main!(benches);
