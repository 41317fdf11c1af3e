use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mmshap_bench::workload;
use mmshap_core::shapley::{exact_shapley, monte_carlo_shapley};
use mmshap_core::EstimatorConfig;

fn exact(c: &mut Criterion) {
    let mut group = c.benchmark_group("exact_shapley");
    group.sample_size(10);
    for frames in [2, 6, 10] {
        let (_, layout, model) = workload(frames);
        group.bench_with_input(BenchmarkId::from_parameter(layout.len()), &layout, |b, layout| {
            b.iter(|| exact_shapley(&model, layout).unwrap())
        });
    }
    group.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let mut group = c.benchmark_group("monte_carlo_shapley");
    group.sample_size(10);
    let (_, layout, model) = workload(40);
    for iterations in [1000, 5000] {
        for antithetic in [false, true] {
            let cfg = EstimatorConfig::default().with_iterations(iterations).with_antithetic(antithetic);
            let id = format!("{iterations}/antithetic={antithetic}");
            group.bench_function(id, |b| b.iter(|| monte_carlo_shapley(&model, &layout, &cfg).unwrap()));
        }
    }
    group.finish();
}

criterion_group!(benches, exact, monte_carlo);
criterion_main!(benches);
