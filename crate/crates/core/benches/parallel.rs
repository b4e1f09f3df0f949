//! Sequential vs data-parallel sweeps. The sequential side runs the same code
//! inside a one-thread pool.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rayon::{ThreadPool, ThreadPoolBuilder};
use zsg::{
    generate_random_game, run_experiment, solve_exact, state_values, ExperimentConfig,
    IterationOptions, QTable,
};

fn pools() -> Vec<(&'static str, ThreadPool)> {
    vec![
        (
            "sequential",
            ThreadPoolBuilder::new().num_threads(1).build().unwrap(),
        ),
        ("parallel", ThreadPoolBuilder::new().build().unwrap()),
    ]
}

fn value_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("state_values");
    for states in [50, 400] {
        let game = generate_random_game(states, 5, 5, 0.6, 0.1, (0.0, 1.0), 1).unwrap();
        let q = solve_exact(&game, &IterationOptions::with_tol(1e-6))
            .unwrap()
            .q_star;
        for (name, pool) in pools() {
            group.bench_with_input(BenchmarkId::new(name, states), &q, |b, q: &QTable| {
                b.iter(|| pool.install(|| state_values(black_box(q)).unwrap()))
            });
        }
    }
    group.finish();
}

fn experiment(c: &mut Criterion) {
    let mut group = c.benchmark_group("experiment");
    group.sample_size(10);
    let mut cfg = ExperimentConfig::comparison(0);
    cfg.episodes = 8;
    cfg.iterations = 200;
    for (name, pool) in pools() {
        group.bench_function(name, |b| {
            b.iter(|| pool.install(|| run_experiment(black_box(&cfg)).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, value_sweep, experiment);
criterion_main!(benches);
