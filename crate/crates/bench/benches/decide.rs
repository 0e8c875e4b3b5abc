use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use multicausal::order::oracle_subset_condition;
use multicausal::precedes_measures;
use multicausal_bench::causal_pair;

fn flow_decision(c: &mut Criterion) {
    let mut group = c.benchmark_group("precedes_measures");
    for atoms in [16, 64, 256, 1024] {
        let (mu, nu) = causal_pair(atoms, 1);
        group.bench_with_input(BenchmarkId::from_parameter(atoms), &(mu, nu), |b, (mu, nu)| {
            b.iter(|| precedes_measures(mu, nu).unwrap())
        });
    }
    group.finish();
}

fn subset_oracle(c: &mut Criterion) {
    let mut group = c.benchmark_group("oracle_subset_condition");
    for atoms in [8, 12, 16] {
        let (mu, nu) = causal_pair(atoms, 2);
        group.bench_with_input(BenchmarkId::from_parameter(atoms), &(mu, nu), |b, (mu, nu)| {
            b.iter(|| oracle_subset_condition(mu, nu).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, flow_decision, subset_oracle);
criterion_main!(benches);
