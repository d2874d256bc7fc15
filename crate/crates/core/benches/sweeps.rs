//! Sequential against rayon execution of the task-parallel sweeps.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use photon_lattice::dynamics::{circulate_coherent, lifetime_sweep, plus_state, LifetimeConfig, Method};
use photon_lattice::lda::local_phase_map;
use photon_lattice::operators::{PerturbationKind, PerturbationSpec};
use photon_lattice::par::Exec;
use photon_lattice::{period, Complex64};
use std::hint::black_box;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn disorder(c: &mut Criterion) {
    let cfg = LifetimeConfig {
        ns: vec![8, 12],
        realizations: 16,
        q_max: 4,
        perturbation: PerturbationSpec {
            kind: PerturbationKind::CouplingGeneric,
            strength: 0.1,
            seed: 3,
        },
        ..Default::default()
    };
    let mut group = c.benchmark_group("lifetime_sweep");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| lifetime_sweep(black_box(&cfg), exec).unwrap())
        });
    }
    group.finish();
}

fn phase_map(c: &mut Criterion) {
    let mut group = c.benchmark_group("local_phase_map");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| local_phase_map(black_box(40), 0.0, 1.0, 24, 16, exec).unwrap())
        });
    }
    group.finish();
}

fn coherent(c: &mut Criterion) {
    let times: Vec<f64> = (0..=20).map(|k| period(1.0) * k as f64 / 20.0).collect();
    let alpha = Complex64::new(3.0, 0.0);
    let mut group = c.benchmark_group("coherent_sectors");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| circulate_coherent(1.0, 0.0, alpha, black_box(&times), 1e-6, plus_state(), 3, Method::Auto, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, disorder, phase_map, coherent);
criterion_main!(benches);
