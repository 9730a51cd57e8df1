use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use spinbath::engine::{abs_r2_series_with, Execution};
use spinbath::sampling::{preset, sample_environment, AlphaMode, CouplingDistribution, EnvironmentSpec, GroupSpec};
use spinbath::TimeGrid;

fn series(c: &mut Criterion) {
    let mut group = c.benchmark_group("abs_r2_series");
    group.sample_size(20);

    let large = EnvironmentSpec {
        groups: vec![GroupSpec::new("bath", 1000, CouplingDistribution::uniform(0.5, 0.1), AlphaMode::RandomUniform)],
        seed: 7,
        randomize_phases: false,
    };
    let envs = [
        ("fig2", sample_environment(&preset("fig2").unwrap().spec).unwrap()),
        ("fig4", sample_environment(&preset("fig4").unwrap().spec).unwrap()),
        ("n1000", sample_environment(&large).unwrap()),
    ];
    let grid = TimeGrid::new(0.0, 100.0, 10_000).unwrap();

    for (name, env) in &envs {
        for (label, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
            group.bench_with_input(BenchmarkId::new(label, name), env, |b, env| {
                b.iter(|| abs_r2_series_with(black_box(env), black_box(&grid), exec))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, series);
criterion_main!(benches);
