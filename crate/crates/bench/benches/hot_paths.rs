use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use hml_bench::{random_features, random_poses};
use hml_core::diversity::{classify, fit_nn_index};
use hml_core::features::{self, Waveform, SAMPLE_RATE};
use hml_core::metrics::{dtw, frechet_discrete, frechet_gaussian};
use hml_core::model::{forward_deterministic, ModelConfig, ModelParams};
use hml_core::train::backward;

fn bench_forward(c: &mut Criterion) {
    let params = ModelParams::init(ModelConfig::deterministic(2, 64), 1).unwrap();
    let x = random_features(2, 250);
    c.bench_function("forward_deterministic L2 H64 T250", |b| {
        b.iter(|| forward_deterministic(black_box(&params), black_box(&x)).unwrap())
    });
}

fn bench_backward(c: &mut Criterion) {
    let params = ModelParams::init(ModelConfig::deterministic(2, 64), 3).unwrap();
    let x = random_features(4, 250);
    let target = random_poses(5, 250);
    c.bench_function("bptt_backward L2 H64 T250", |b| {
        b.iter(|| backward(black_box(&params), black_box(&x), black_box(&target), None).unwrap())
    });
}

fn bench_metrics(c: &mut Criterion) {
    let a = random_poses(6, 250);
    let b_seq = random_poses(7, 250);
    c.bench_function("dtw T250xT250", |b| {
        b.iter(|| dtw(black_box(&a), black_box(&b_seq)).unwrap())
    });
    c.bench_function("frechet_discrete T250xT250", |b| {
        b.iter(|| frechet_discrete(black_box(&a), black_box(&b_seq)).unwrap())
    });
    c.bench_function("frechet_gaussian T250", |b| {
        b.iter(|| frechet_gaussian(black_box(&a), black_box(&b_seq)).unwrap())
    });
}

fn bench_mel(c: &mut Criterion) {
    let n = 10 * SAMPLE_RATE as usize;
    let samples: Vec<f64> = (0..n)
        .map(|i| 0.3 * (std::f64::consts::TAU * 440.0 * i as f64 / SAMPLE_RATE as f64).sin())
        .collect();
    let w = Waveform::new(samples, SAMPLE_RATE).unwrap();
    c.bench_function("mel_spectrogram 10s", |b| {
        b.iter(|| features::mel_spectrogram(black_box(&w)).unwrap())
    });
}

fn bench_nn_classify(c: &mut Criterion) {
    let corpus: Vec<_> = (0..100).map(|i| random_poses(100 + i, 250)).collect();
    let index = fit_nn_index(&corpus).unwrap();
    let preds: Vec<_> = (0..50).map(|i| random_poses(500 + i, 250)).collect();
    c.bench_function("nn_classify 50x100 T250", |b| {
        b.iter(|| classify(black_box(&index), black_box(&preds)).unwrap())
    });
}

criterion_group!(
    benches,
    bench_forward,
    bench_backward,
    bench_metrics,
    bench_mel,
    bench_nn_classify
);
criterion_main!(benches);
