//! Solver benchmarks: exact evolution across bath sizes, the brute-force
//! product-basis reference it is validated against, and the four
//! master-equation integrators (memory-kernel and local-in-time, under the
//! uncorrelated and correlated projectors).

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use spinstar::exact_dynamics::{brute_force_evolve, exact_evolve, period};
use spinstar::{DensityMatrix, GridSpec, HalfInt, ModelSpec, ProjectorKind};
use std::hint::black_box;

/// Eleven equally spaced samples covering [0, t_end].
fn sample_times(t_end: f64) -> Vec<f64> {
    (0..11).map(|i| t_end * i as f64 / 10.0).collect()
}

fn upper_state() -> DensityMatrix {
    DensityMatrix::basis_projector(HalfInt::ONE, HalfInt::ONE).expect("valid projector")
}

/// Exact collective-sector evolution at figure-scale bath sizes.
fn bench_exact_evolve(c: &mut Criterion) {
    let mut group = c.benchmark_group("exact_evolve");
    group.sample_size(10);
    for n in [50u32, 100, 200] {
        let model = ModelSpec::resonant(HalfInt::ONE, n, 0.25, 1.0);
        let rho0 = upper_state();
        let times = sample_times(6.28);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| exact_evolve(black_box(&model), black_box(&rho0), &times).unwrap())
        });
    }
    group.finish();
}

/// Full product-basis diagonalization; exponential in the bath size, so it
/// only serves as the small-size oracle.
fn bench_brute_force(c: &mut Criterion) {
    let mut group = c.benchmark_group("brute_force_evolve");
    group.sample_size(10);
    for n in [4u32, 6] {
        let model = ModelSpec::resonant(HalfInt::ONE, n, 0.25, 1.0);
        let rho0 = upper_state();
        let times = sample_times(period(&model));
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| brute_force_evolve(black_box(&model), black_box(&rho0), &times).unwrap())
        });
    }
    group.finish();
}

/// The four second-order master-equation integrators at N = 101. The
/// correlated-projector runs use a coarser grid because the memory-kernel
/// convolution cost grows quadratically with the step count.
fn bench_master_equations(c: &mut Criterion) {
    let model = ModelSpec::resonant(HalfInt::ONE, 101, 0.25, 1.0);
    let rho0 = upper_state();
    let fine = GridSpec::from_zero(1.0, 1e-2);
    let coarse = GridSpec::from_zero(1.0, 2e-2);

    let mut group = c.benchmark_group("master_equations");
    group.sample_size(10);
    group.bench_function("nz_thermal", |b| {
        b.iter(|| {
            spinstar::master_equations::nz_solve(
                black_box(&model),
                ProjectorKind::ThermalProduct,
                black_box(&rho0),
                &fine,
            )
            .unwrap()
        })
    });
    group.bench_function("tcl_thermal", |b| {
        b.iter(|| {
            spinstar::master_equations::tcl_solve(
                black_box(&model),
                ProjectorKind::ThermalProduct,
                black_box(&rho0),
                &fine,
            )
            .unwrap()
        })
    });
    group.bench_function("nz_correlated", |b| {
        b.iter(|| {
            spinstar::master_equations::nz_solve(
                black_box(&model),
                ProjectorKind::Correlated,
                black_box(&rho0),
                &coarse,
            )
            .unwrap()
        })
    });
    group.bench_function("tcl_correlated", |b| {
        b.iter(|| {
            spinstar::master_equations::tcl_solve(
                black_box(&model),
                ProjectorKind::Correlated,
                black_box(&rho0),
                &coarse,
            )
            .unwrap()
        })
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_exact_evolve,
    bench_brute_force,
    bench_master_equations
);
criterion_main!(benches);
