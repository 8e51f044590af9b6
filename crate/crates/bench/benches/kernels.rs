//! Criterion benchmarks for the hot numerical kernels.

use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use echo_lab::classical_rotor::{standard_map_step, ClassicalEnsemble};
use echo_lab::glauber::{populations_from_weight, RadialWeight};
use echo_lab::hilbert::{gaussian_packet, make_grid, Region};
use echo_lab::oscillator::{evolve_classical, Drive, OscParams, OscState};
use echo_lab::qkr::{RotorParams, RotorPropagator};
use num_complex::Complex64;
use std::hint::black_box;

fn bench_floquet_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("floquet_step");
    for log2n in [11u32, 13, 15] {
        let n = 1usize << log2n;
        let grid = make_grid(n).unwrap();
        let params = RotorParams::new(10.0, 1.1 * grid.hbar());
        let prop = RotorPropagator::new(grid, &params);
        let state = gaussian_packet(grid, 0.25, 0.35);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter_batched(
                || state.clone(),
                |mut s| {
                    prop.step(&mut s, true);
                    s
                },
                BatchSize::SmallInput,
            )
        });
    }
    group.finish();
}

fn bench_packet_synthesis(c: &mut Criterion) {
    let grid = make_grid(1 << 13).unwrap();
    c.bench_function("gaussian_packet_8192", |b| {
        b.iter(|| gaussian_packet(black_box(grid), black_box(0.25), black_box(0.35)))
    });
}

fn bench_standard_map(c: &mut Criterion) {
    let region = Region::new(0.2, 0.3, 0.3, 0.4).unwrap();
    let ensemble = ClassicalEnsemble::uniform_in_region(&region, 10_000, 1).unwrap();
    c.bench_function("standard_map_10k_step", |b| {
        b.iter_batched(
            || (ensemble.thetas.clone(), ensemble.ps.clone()),
            |(mut thetas, mut ps)| {
                for (theta, p) in thetas.iter_mut().zip(&mut ps) {
                    let (t1, p1) = standard_map_step(*theta, *p, 10.0);
                    *theta = t1;
                    *p = p1;
                }
                (thetas, ps)
            },
            BatchSize::SmallInput,
        )
    });
}

fn bench_oscillator_trajectory(c: &mut Criterion) {
    let params = OscParams {
        omega0: 1.0,
        drive: Drive::smooth_equal(5.0, 3, vec![0.0, 0.0, 0.0]),
    };
    let state = OscState::new(Complex64::new(5.0f64.sqrt(), 0.0));
    c.bench_function("smooth_trajectory_t20_dt0.01", |b| {
        b.iter(|| evolve_classical(black_box(&state), &params, 20.0, 0.01).unwrap())
    });
}

fn bench_populations(c: &mut Criterion) {
    let weight = RadialWeight::gaussian(0.4).unwrap();
    c.bench_function("glauber_populations_200", |b| {
        b.iter(|| populations_from_weight(black_box(&weight), 0.1, 200).unwrap())
    });
}

criterion_group!(
    benches,
    bench_floquet_step,
    bench_packet_synthesis,
    bench_standard_map,
    bench_oscillator_trajectory,
    bench_populations
);
criterion_main!(benches);
