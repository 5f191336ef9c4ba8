use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use latentnode::cluster::{k_medoids_with, CooccurrenceIndex, KMedoidsOptions};
use latentnode::eval::run_experiment_with;
use latentnode::simulate::generate_records_with;
use latentnode::{ExecMode, ExperimentConfig, PersonId, SimulationConfig, SocialNetwork};

const MODES: [(&str, ExecMode); 2] = [
    ("serial", ExecMode::Serial),
    ("parallel", ExecMode::Parallel),
];

fn bench_generate(c: &mut Criterion) {
    let net = SocialNetwork::builtin_911();
    let cfg = SimulationConfig {
        t: 0.8,
        basket_count: 3700,
        rng_seed: 1,
    };
    let mut group = c.benchmark_group("generate_records");
    for (name, mode) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| generate_records_with(&net, &cfg, mode).unwrap())
        });
    }
    group.finish();
}

fn bench_k_medoids(c: &mut Criterion) {
    let net = SocialNetwork::builtin_911();
    let cfg = SimulationConfig {
        t: 0.8,
        basket_count: 370,
        rng_seed: 1,
    };
    let records = generate_records_with(&net, &cfg, ExecMode::Serial).unwrap();
    let idx = CooccurrenceIndex::new(&records);
    let mut group = c.benchmark_group("k_medoids_restarts");
    for (name, mode) in MODES {
        let opts = KMedoidsOptions {
            restarts: 32,
            exec: mode,
            ..Default::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| k_medoids_with(&idx, 4, 7, &[], &opts).unwrap())
        });
    }
    group.finish();
}

fn bench_experiment(c: &mut Criterion) {
    let net = SocialNetwork::builtin_911();
    let mut cfg = ExperimentConfig::headline(PersonId::new("Mustafa A. Al-Hisawi").unwrap());
    cfg.trials = 16;
    let mut group = c.benchmark_group("run_experiment");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run_experiment_with(&net, &cfg, mode).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_generate, bench_k_medoids, bench_experiment);
criterion_main!(benches);
