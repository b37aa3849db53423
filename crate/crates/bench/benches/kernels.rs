use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use homog_bench::problem;
use homog_core::evolution::{solve_random, EvolutionParams};
use homog_core::graphs::{census, enumerate_pairings};
use homog_core::grid::{Field, FourierPlan, GridSpec};

fn fft(c: &mut Criterion) {
    let mut group = c.benchmark_group("fft_roundtrip");
    for (d, n) in [(1usize, 2048usize), (2, 128), (3, 32)] {
        let grid = GridSpec::new(d, n, 8.0).unwrap();
        let plan = FourierPlan::new(&grid);
        let f = Field::gaussian_bump(grid, 1.0, 1.0);
        group.bench_with_input(BenchmarkId::new(format!("d{d}"), n), &f, |b, f| {
            b.iter(|| plan.inverse(&plan.forward(black_box(f))).unwrap())
        });
    }
    group.finish();
}

fn strang(c: &mut Criterion) {
    let (_, u0, pot) = problem(2048, 0.05, 0.4);
    let p = EvolutionParams::new(1, 0.4, 0.05, 0.2, 0.02).unwrap();
    c.bench_function("solve_random_d1_n2048_10_steps", |b| {
        b.iter(|| solve_random(black_box(&u0), &pot, &p).unwrap())
    });
}

fn pairings(c: &mut Criterion) {
    c.bench_function("enumerate_pairings_6", |b| {
        b.iter(|| enumerate_pairings(black_box(6)).unwrap())
    });
    c.bench_function("census_5", |b| b.iter(|| census(black_box(5)).unwrap()));
}

criterion_group!(benches, fft, strang, pairings);
criterion_main!(benches);
