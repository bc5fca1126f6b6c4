use std::hint::black_box;

use cmdgraph_bench::corpus_sessions;
use cmdgraph_core::miner::{mine, post_filter};
use cmdgraph_core::MiningConfig;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn mining(c: &mut Criterion) {
    let mut group = c.benchmark_group("mine");
    group.sample_size(10);
    for n in [300, 1200] {
        let sessions = corpus_sessions(n, 7);
        let cfg = MiningConfig::default();
        group.bench_with_input(BenchmarkId::new("gap5", n), &sessions, |b, s| {
            b.iter(|| mine(black_box(s), &cfg).unwrap())
        });
        let mined = mine(&sessions, &cfg).unwrap();
        group.bench_with_input(BenchmarkId::new("post_filter", n), &mined, |b, m| {
            b.iter(|| post_filter(black_box(m), &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, mining);
criterion_main!(benches);
