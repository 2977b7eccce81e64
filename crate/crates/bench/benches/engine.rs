use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use retrowpt_core::{
    run_trials, Experiment, HarvesterModel, Path, RunOptions, Scenario, SystemParams,
};

fn trials(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_trials_100");
    group.sample_size(20);
    let opts = RunOptions {
        workers: 1,
        noise_free: false,
    };
    for (scenario, path) in [
        (Scenario::Pn, Path::Exact),
        (Scenario::Pn, Path::Asymptotic),
        (Scenario::Offset, Path::Exact),
    ] {
        let exp = Experiment {
            params: SystemParams::with_defaults(4, 40),
            harvester: HarvesterModel::default(),
            scenario,
            path,
        };
        group.bench_function(BenchmarkId::new(scenario.name(), path), |b| {
            b.iter(|| run_trials(&exp, 100, 1, &opts).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, trials);
criterion_main!(benches);
