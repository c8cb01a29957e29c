use std::hint::black_box;
use std::path::PathBuf;

use criterion::{criterion_group, criterion_main, Criterion};

use fsw_aml::attack::poisson_perturb;
use fsw_aml::gnc::Hyperparams;
use fsw_aml::ingest::synth_crater_dataset;
use fsw_aml::par;
use fsw_aml::scenario::{parse_config, run_scenario, ScenarioConfig};
use fsw_aml::vision::{classify, train_classifier};

fn scenario(name: &str) -> ScenarioConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.toml"));
    parse_config(&std::fs::read(path).unwrap()).unwrap()
}

fn poisoning_trials(c: &mut Criterion) {
    let config = scenario("gnc_poison");
    let seeds: Vec<u64> = (0..32).collect();
    let trial = |&s: &u64| run_scenario(&config.with_seed(s)).is_ok();
    let mut group = c.benchmark_group("poisoning_trials_32");
    group.sample_size(10);
    group.bench_function("parallel", |b| {
        b.iter(|| black_box(par::map(&seeds, trial)))
    });
    group.bench_function("sequential", |b| {
        b.iter(|| black_box(par::map_sequential(&seeds, trial)))
    });
    group.finish();
}

fn evasion_evaluation(c: &mut Criterion) {
    let train = synth_crater_dataset(50, 16, 1).unwrap();
    let test = synth_crater_dataset(200, 16, 2).unwrap();
    let params = train_classifier(&train, &Hyperparams::new(0.1, 200, 3).unwrap()).unwrap();
    let indexed: Vec<usize> = (0..test.len()).collect();
    let attacked = |&i: &usize| {
        let frame = poisson_perturb(&test.frames()[i], 0.125, i as u64).unwrap();
        classify(&params, &frame).unwrap().1
    };
    let mut group = c.benchmark_group("attacked_classification_400");
    group.bench_function("parallel", |b| {
        b.iter(|| black_box(par::map(&indexed, attacked)))
    });
    group.bench_function("sequential", |b| {
        b.iter(|| black_box(par::map_sequential(&indexed, attacked)))
    });
    group.finish();
}

fn calibrated_scenario(c: &mut Criterion) {
    let config = scenario("vision_evasion");
    let mut group = c.benchmark_group("vision_scenario");
    group.sample_size(10);
    group.bench_function("run", |b| {
        b.iter(|| black_box(run_scenario(&config).unwrap()))
    });
    group.finish();
}

criterion_group!(
    benches,
    poisoning_trials,
    evasion_evaluation,
    calibrated_scenario
);
criterion_main!(benches);
