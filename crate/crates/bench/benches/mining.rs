use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dynidx_bench::{dense_delta, dense_kb, dense_union};
use dynidx_core::synth::{self, DenseConfig};
use dynidx_core::{mine_incremental, mine_maximal, MiningParameters};

fn cold(c: &mut Criterion) {
    let params = MiningParameters::new(0.05).unwrap();
    let mut group = c.benchmark_group("mine_maximal");
    group.sample_size(20);
    for rows in [1_000, 10_000] {
        let db = synth::dense_context(&DenseConfig::default(), rows, 9);
        group.bench_with_input(BenchmarkId::from_parameter(rows), &db, |b, db| {
            b.iter(|| mine_maximal(black_box(db), &params))
        });
    }
    group.finish();
}

fn incremental(c: &mut Criterion) {
    let kb = dense_kb(10_000, 9);
    let mut group = c.benchmark_group("add_rows_to_10k");
    group.sample_size(20);
    for extra in [50, 500] {
        let delta = dense_delta(&kb, extra, 10);
        group.bench_with_input(BenchmarkId::new("incremental", extra), &delta, |b, delta| {
            b.iter(|| mine_incremental(black_box(&kb), delta).unwrap())
        });
        group.bench_function(BenchmarkId::new("cold", extra), |b| {
            b.iter(|| mine_maximal(&dense_union(10_000, 9, extra, 10), &kb.parameters))
        });
    }
    group.finish();
}

criterion_group!(benches, cold, incremental);
criterion_main!(benches);
