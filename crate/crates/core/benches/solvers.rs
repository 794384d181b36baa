//! Hot paths timed under the compiled backend. With `parallel` each workload
//! runs on a one-worker pool and on the default pool; build with
//! `--no-default-features` for the plain sequential baseline.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use displab::displacement::{ground_state, linspace, neumann_operator, sweep_axis, SolveOptions};
use displab::{par, Displacement, GridSpec, LinearOperator, PotentialSpec};

fn pools() -> Vec<(String, usize)> {
    let mut v = vec![(format!("{}-1", par::BACKEND), 1)];
    if cfg!(feature = "parallel") {
        // at least two workers, so the pool overhead shows up on a single core too
        let n = par::current_threads().max(2);
        v.push((format!("{}-{n}", par::BACKEND), n));
    }
    v
}

fn kernels(c: &mut Criterion) {
    let q = PotentialSpec::well(2, -10.0, 0.3).unwrap();
    let grid = GridSpec::unit_cube(2, 256).unwrap();
    let op = neumann_operator(&q, &Displacement(vec![0.1, -0.05]), &grid).unwrap();
    let x: Vec<f64> = (0..op.dim()).map(|i| ((i * 7919) % 1009) as f64 / 1009.0 - 0.5).collect();
    let mut y = vec![0.0; x.len()];

    let mut g = c.benchmark_group("kernels_256x256");
    for (label, n) in pools() {
        g.bench_function(BenchmarkId::new("apply", &label), |b| {
            b.iter(|| par::with_threads(n, || op.apply(black_box(&x), &mut y)))
        });
        g.bench_function(BenchmarkId::new("precondition", &label), |b| {
            b.iter(|| par::with_threads(n, || op.precondition(black_box(&x), &mut y)))
        });
        g.bench_function(BenchmarkId::new("dot", &label), |b| {
            b.iter(|| par::with_threads(n, || par::dot(black_box(&x), black_box(&x))))
        });
    }
    g.finish();
}

fn solves(c: &mut Criterion) {
    let q = PotentialSpec::well(2, -10.0, 0.3).unwrap();
    let opts = SolveOptions::with_tol(1e-10);
    let grid = GridSpec::unit_cube(2, 64).unwrap();
    let small = GridSpec::unit_cube(2, 32).unwrap();
    let samples = linspace(0.0, q.d_max(), 5);

    let mut g = c.benchmark_group("solves");
    g.sample_size(10);
    for (label, n) in pools() {
        g.bench_function(BenchmarkId::new("ground_64x64", &label), |b| {
            b.iter(|| par::with_threads(n, || ground_state(&q, &Displacement(vec![0.1, 0.1]), &grid, &opts).unwrap()))
        });
        g.bench_function(BenchmarkId::new("axis_sweep_5_32x32", &label), |b| {
            b.iter(|| par::with_threads(n, || sweep_axis(&q, 0, &[0.0], &samples, &small, &opts).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, kernels, solves);
criterion_main!(benches);
