use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion, Throughput};
use tfqka_core::{plan_network, run_session, MuPolicy, PartyGraph, SessionConfig};

fn session(c: &mut Criterion) {
    let n = 1u64 << 20;
    let config = SessionConfig::symmetric(0.2, 100.0, n);
    let mut group = c.benchmark_group("run_session");
    group.sample_size(10);
    group.throughput(Throughput::Elements(n));
    group.bench_function("1M_pulses_100km", |b| b.iter(|| run_session(black_box(&config)).unwrap()));
    group.finish();
}

fn planning(c: &mut Criterion) {
    // Ring of 64 parties with chords.
    let mut edges = Vec::new();
    for i in 0..64u32 {
        edges.push((i, (i + 1) % 64, 5.0 + f64::from(i % 7)));
        edges.push((i, (i + 9) % 64, 12.0 + f64::from(i % 5)));
    }
    let graph = PartyGraph::from_edges(&edges);
    let policy = MuPolicy::Optimize((1..=20).map(|k| f64::from(k) * 0.05).collect());
    c.bench_function("plan_network_64", |b| b.iter(|| plan_network(black_box(&graph), &policy, 0.0).unwrap()));
}

criterion_group!(benches, session, planning);
criterion_main!(benches);
