use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use paa_core::linalg::{constrained_ls_alpha, lu_factor};
use paa_core::matrix::DenseMatrix;
use paa_core::precond::PreconditionerKind;
use paa_core::solver::{paa_solve, SolverConfig};
use paa_core::suite::{make_bratu, make_trig};

fn bench_solves(c: &mut Criterion) {
    let mut group = c.benchmark_group("trig50_solve");
    let p = make_trig(50);
    let x0 = vec![std::f64::consts::FRAC_PI_4 + 0.03; 50];
    for (label, kind, m) in [
        ("diag_m3", PreconditionerKind::DiagJacobian, 3usize),
        ("full_m3", PreconditionerKind::FullJacobian, 3),
        ("full_m0", PreconditionerKind::FullJacobian, 0),
    ] {
        let cfg = SolverConfig::new(kind, m);
        group.bench_function(label, |b| {
            b.iter(|| paa_solve(&p, &x0, &cfg).unwrap());
        });
    }
    group.finish();

    let mut group = c.benchmark_group("bratu_solve");
    for grid in [8usize, 16] {
        let p = make_bratu(grid, 6.0);
        let u0 = vec![1.0; p.dim];
        let mut cfg = SolverConfig::new(PreconditionerKind::DiagJacobian, 20);
        cfg.n_max = 500;
        group.bench_with_input(BenchmarkId::new("diag_m20", grid), &grid, |b, _| {
            b.iter(|| paa_solve(&p, &u0, &cfg).unwrap());
        });
    }
    group.finish();
}

fn bench_kernels(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cols: Vec<Vec<f64>> = (0..6)
        .map(|_| (0..200).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    c.bench_function("constrained_ls_alpha_n200_m5", |b| {
        b.iter(|| constrained_ls_alpha(&cols).unwrap());
    });

    let a = DenseMatrix::from_fn(100, 100, |i, j| {
        if i == j {
            10.0
        } else {
            ((i * 31 + j * 17) % 13) as f64 / 13.0 - 0.5
        }
    });
    c.bench_function("lu_factor_n100", |b| {
        b.iter(|| lu_factor(&a).unwrap());
    });
}

criterion_group!(benches, bench_solves, bench_kernels);
criterion_main!(benches);
