use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use mdaux::hierarchy::{accumulate_expected_tables, sweep, Scheme};
use mdaux::multi::{expected_parent_tables, md_log_marginal};
use mdaux::oracle::{brute_force_marginal, EnumerationBudget};
use mdaux::{CountVector, StirlingTable};
use mdaux_bench::{model, prior};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn stirling(c: &mut Criterion) {
    let mut group = c.benchmark_group("stirling_table");
    for n in [100, 1000, 4000] {
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| StirlingTable::new(n).unwrap())
        });
    }
    group.finish();
}

fn closed_forms(c: &mut Criterion) {
    let md = prior(4, 50);
    let data = CountVector::new((0..50).map(|k| (k * 7) % 40).collect());
    c.bench_function("md_log_marginal/4x50", |b| b.iter(|| md_log_marginal(&md, &data).unwrap()));
    c.bench_function("expected_parent_tables/4x50", |b| {
        b.iter(|| expected_parent_tables(&md, &data).unwrap())
    });

    let small = prior(3, 3);
    let counts = CountVector::new(vec![3, 2, 3]);
    let budget = EnumerationBudget::default();
    c.bench_function("brute_force_marginal/3x3/n8", |b| {
        b.iter(|| brute_force_marginal(&small, &counts, &budget).unwrap())
    });
}

fn sweeps(c: &mut Criterion) {
    let state = model(2, 5, 50, 100, 1);
    c.bench_function("accumulate_expected_tables/D50", |b| {
        b.iter_batched(|| state.clone(), |mut s| accumulate_expected_tables(&mut s), BatchSize::SmallInput)
    });
    for scheme in [Scheme::Expectation, Scheme::Gibbs] {
        let name = format!("sweep/{}/D50", format!("{scheme:?}").to_lowercase());
        c.bench_function(&name, |b| {
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            b.iter_batched(|| state.clone(), |mut s| sweep(&mut s, &mut rng, scheme), BatchSize::SmallInput)
        });
    }
}

criterion_group!(benches, stirling, closed_forms, sweeps);
criterion_main!(benches);
