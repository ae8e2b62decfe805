use std::hint::black_box;

use backcom_core::bcd::greedy_tas;
use backcom_core::benchmarks::solve_tc;
use backcom_core::cap::{solve_cap, CAP_GAP_TOL};
use backcom_core::channel::draw_trial;
use backcom_core::config::parse_config;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn cap(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_cap");
    for n in [2usize, 4, 8, 16] {
        let rates: Vec<f64> = (0..n).map(|i| 1.0 + i as f64 * 0.7).collect();
        group.bench_with_input(BenchmarkId::from_parameter(n), &rates, |b, r| {
            b.iter(|| solve_cap(black_box(r), CAP_GAP_TOL, 1000).unwrap())
        });
    }
    group.finish();
}

fn trial(c: &mut Criterion) {
    let cfg = parse_config("").unwrap();
    let (_, ch) = draw_trial(&cfg, 0).unwrap();
    c.bench_function("greedy_tas/default", |b| {
        b.iter(|| greedy_tas(black_box(&ch), &cfg))
    });
    c.bench_function("tc/default", |b| b.iter(|| solve_tc(black_box(&ch), &cfg)));
}

criterion_group!(benches, cap, trial);
criterion_main!(benches);
