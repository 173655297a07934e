use std::hint::black_box;

use coacs_core::coacs::{Objective, SmoothObjective, Terms};
use coacs_core::{
    autocorr_support, dft2, phase_single, ComplexGrid, Direction, HealProblem, PhaseConfig, RealGrid, SupportMask,
};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn pattern(n: usize) -> RealGrid {
    let c = (n / 2) as f64;
    RealGrid::from_fn(n, |i, j| {
        let r2 = (i as f64 - c).powi(2) + (j as f64 - c).powi(2);
        (20.0 * (-r2 / (n as f64)).exp()).floor()
    })
}

fn bench_dft2(c: &mut Criterion) {
    let mut group = c.benchmark_group("dft2");
    for n in [64, 128, 256] {
        let field = { let p = pattern(n); ComplexGrid::from_fn(n, |i, j| p[(i, j)].into()) };
        group.bench_with_input(BenchmarkId::from_parameter(n), &field, |b, f| {
            b.iter(|| dft2(black_box(f), Direction::Forward).unwrap())
        });
    }
    group.finish();
}

fn bench_objective(c: &mut Criterion) {
    let mut group = c.benchmark_group("objective_evaluate");
    for n in [64, 128] {
        let acs = autocorr_support(&SupportMask::centered_square(n, n / 8).unwrap()).unwrap();
        let problem = HealProblem::new(pattern(n), SupportMask::empty(n), acs, 1.0, 2, 4.0).unwrap();
        let mut obj = Objective::new(&problem, 1.0, 5e7, problem.y0.as_slice().to_vec(), Terms::Both).unwrap();
        let y = vec![0.0; n * n];
        group.bench_function(BenchmarkId::from_parameter(n), |b| {
            b.iter(|| obj.evaluate(black_box(y.clone())).unwrap().value)
        });
    }
    group.finish();
}

fn bench_phasing(c: &mut Criterion) {
    let n = 64;
    let amplitudes = pattern(n).map(f64::sqrt);
    let support = SupportMask::centered_square(n, 15).unwrap();
    let config = PhaseConfig {
        hio_iters: 100,
        er_iters: 0,
        ..PhaseConfig::default()
    };
    c.bench_function("hio_100_iterations_64", |b| {
        b.iter(|| phase_single(&amplitudes, &SupportMask::empty(n), &support, &config, 1).unwrap().real_space_error)
    });
}

criterion_group!(benches, bench_dft2, bench_objective, bench_phasing);
criterion_main!(benches);
