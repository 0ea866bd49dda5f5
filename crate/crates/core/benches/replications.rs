use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use perturbed_pricing::simulator::run_replications_with;
use perturbed_pricing::verification::{verify_suite, Suite};
use perturbed_pricing::{Execution, Policy, SimulationConfig};

fn modes() -> [(&'static str, Execution); 2] {
    [
        ("sequential", Execution::Sequential),
        ("parallel", Execution::Parallel),
    ]
}

fn replications(c: &mut Criterion) {
    let mut group = c.benchmark_group("replications");
    group.sample_size(10);
    for (link, cfg) in [
        ("identity", SimulationConfig::default()),
        (
            "logistic",
            SimulationConfig {
                horizon: 500,
                ..SimulationConfig::logistic()
            },
        ),
    ] {
        for (mode, exec) in modes() {
            group.bench_with_input(BenchmarkId::new(link, mode), &cfg, |b, cfg| {
                b.iter(|| {
                    run_replications_with(black_box(cfg), Policy::Perturbed, 8, 0, exec).unwrap()
                })
            });
        }
    }
    group.finish();
}

fn verification(c: &mut Criterion) {
    let mut group = c.benchmark_group("verify");
    group.sample_size(10);
    for (mode, exec) in modes() {
        group.bench_function(BenchmarkId::new("prop4", mode), |b| {
            b.iter(|| verify_suite(Suite::Prop4, black_box(200), 0, exec).unwrap())
        });
        group.bench_function(BenchmarkId::new("mqle_oracle", mode), |b| {
            b.iter(|| verify_suite(Suite::MqleOracle, black_box(100), 0, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, replications, verification);
criterion_main!(benches);
