use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use toptrack::reachability::{compute_controllable_sets, robust_u_interval};
use toptrack::Scenario;

fn sets(c: &mut Criterion) {
    let mut group = c.benchmark_group("controllable_sets");
    for stages in [100, 400] {
        let mut sc = Scenario::shipped("arm2").unwrap();
        sc.config.stages = stages;
        let cons = sc.constraints(sc.config.radius).unwrap();
        let (grid, terminal, opts) = (sc.grid(), sc.terminal_set(), sc.reach_options());
        group.bench_with_input(BenchmarkId::new("recursion", stages), &stages, |b, _| {
            b.iter(|| compute_controllable_sets(black_box(&cons), &grid, terminal, &opts).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("coefficients_and_recursion", stages), &stages, |b, _| {
            b.iter(|| sc.sets(black_box(sc.config.radius)).unwrap())
        });
    }
    group.finish();
}

fn robust_interval(c: &mut Criterion) {
    let sc = Scenario::shipped("arm2").unwrap();
    let cons = sc.constraints(sc.config.radius).unwrap();
    c.bench_function("robust_u_interval", |b| b.iter(|| robust_u_interval(black_box(&cons[50]), black_box(0.5))));
}

criterion_group!(benches, sets, robust_interval);
criterion_main!(benches);
