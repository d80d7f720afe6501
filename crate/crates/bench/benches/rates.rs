use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use tfqka_core::keyrate::sweep;
use tfqka_core::{asymptotic_rate, discriminate, holevo, loss_povm, Announcement, ChannelParams};

fn povm_pipeline(c: &mut Criterion) {
    c.bench_function("loss_povm", |b| b.iter(|| loss_povm(black_box(0.2), black_box(0.1)).unwrap()));
    let povm = loss_povm(0.2, 0.1).unwrap();
    c.bench_function("holevo_plus", |b| b.iter(|| holevo(black_box(&povm), Announcement::Plus).unwrap()));
    let params = ChannelParams::from_total_km(0.2, 0.2, 100.0).unwrap();
    c.bench_function("asymptotic_rate", |b| b.iter(|| asymptotic_rate(black_box(&params), 0.0).unwrap()));
    c.bench_function("discriminate", |b| b.iter(|| discriminate(black_box(0.3)).unwrap()));
}

fn distance_sweep(c: &mut Criterion) {
    let points: Vec<ChannelParams> = (0..301)
        .map(|km| ChannelParams::from_total_km(0.2, 0.2, km as f64).unwrap())
        .collect();
    c.bench_function("sweep_301_distances", |b| b.iter(|| sweep(black_box(&points), 0.0).unwrap()));
}

criterion_group!(benches, povm_pipeline, distance_sweep);
criterion_main!(benches);
