//! Sequential vs data-parallel execution of the three fan-out points: the
//! capacity grid, statistical sampling and per-database answers.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use pir_prefetch::audit::{
    audit_capacity_grid, audit_privacy_statistical, GridSpec, StatisticalOptions,
};
use pir_prefetch::engine::{run_retrieval_with, MessageStore, SystemConfig};
use pir_prefetch::scheme::uniform_prefetch;
use pir_prefetch::Execution;

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn grid(c: &mut Criterion) {
    let spec = GridSpec::desk();
    let mut group = c.benchmark_group("capacity_grid");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| audit_capacity_grid(&spec, exec).unwrap())
        });
    }
    group.finish();
}

fn sampling(c: &mut Criterion) {
    let mut group = c.benchmark_group("statistical_audit_2_4_2");
    group.sample_size(10);
    for (name, exec) in MODES {
        let opts = StatisticalOptions {
            samples: 2000,
            exec,
            ..Default::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| audit_privacy_statistical(2, 4, 2, 0, opts).unwrap())
        });
    }
    group.finish();
}

fn retrieval(c: &mut Criterion) {
    let (n, k, m) = (4, 6, 4);
    let config = SystemConfig::new(n, k, m, 1).unwrap();
    let plan = uniform_prefetch(n, k, m, 2).unwrap();
    let desired = (0..k).find(|&x| !plan.is_cached(x)).unwrap();
    let store = MessageStore::random(&config, 3);
    let mut group = c.benchmark_group("retrieval_4_6_4");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run_retrieval_with(exec, &config, &plan, desired, &store, 4).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, grid, sampling, retrieval);
criterion_main!(benches);
