//! Angular-momentum primitives: single Clebsch-Gordan coefficients, the
//! coefficient block consumed per bath sector by the exact solver, and the
//! log-domain degeneracy layer that weights the sectors.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use spinstar::angular_momentum::{
    clebsch_gordan, collective_spins, ln_degeneracy, ln_partition_function, LogFactorialTable,
};
use spinstar::HalfInt;
use std::hint::black_box;

/// One coefficient at a representative large-bath magnitude.
fn bench_single_coefficient(c: &mut Criterion) {
    let lnfac = LogFactorialTable::shared();
    let j1 = HalfInt::ONE;
    let j2 = HalfInt::from_int(20);
    let jt = HalfInt::from_int(20);
    let m1 = HalfInt::ZERO;
    let m2 = HalfInt::from_int(3);
    let mt = HalfInt::from_int(3);
    c.bench_function("clebsch_gordan_single", |b| {
        b.iter(|| {
            clebsch_gordan(
                black_box(j1),
                black_box(m1),
                j2,
                black_box(m2),
                jt,
                mt,
                lnfac,
            )
        })
    });
}

/// Every coefficient coupling a spin-1 system to one bath magnitude: the
/// block the exact solver assembles per sector.
fn bench_coefficient_block(c: &mut Criterion) {
    let lnfac = LogFactorialTable::shared();
    let j1 = HalfInt::ONE;
    let mut group = c.benchmark_group("clebsch_gordan_block");
    for bath_j in [5i32, 20, 50] {
        let j2 = HalfInt::from_int(bath_j);
        group.bench_with_input(BenchmarkId::from_parameter(bath_j), &bath_j, |b, _| {
            b.iter(|| {
                let mut sum = 0.0;
                for jt in HalfInt::range_inclusive(j2 - j1, j2 + j1) {
                    for mt in jt.projections() {
                        for m1 in j1.projections() {
                            let m2 = mt - m1;
                            if m2.twice().abs() <= j2.twice() {
                                sum += clebsch_gordan(j1, m1, j2, m2, jt, mt, lnfac);
                            }
                        }
                    }
                }
                black_box(sum)
            })
        });
    }
    group.finish();
}

/// Log-domain degeneracies and the partition function at a large bath size.
fn bench_degeneracy_layer(c: &mut Criterion) {
    let lnfac = LogFactorialTable::shared();
    c.bench_function("degeneracy_sweep_n400", |b| {
        b.iter(|| {
            let mut sum = 0.0;
            for j in collective_spins(black_box(400)) {
                sum += ln_degeneracy(400, j, lnfac);
            }
            black_box(sum)
        })
    });
    c.bench_function("partition_function_n400", |b| {
        b.iter(|| black_box(ln_partition_function(black_box(400), 0.25)))
    });
}

criterion_group!(
    benches,
    bench_single_coefficient,
    bench_coefficient_block,
    bench_degeneracy_layer
);
criterion_main!(benches);
