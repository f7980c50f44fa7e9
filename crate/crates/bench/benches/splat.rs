use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

use brepsplat_core::splat::verify::{gradient_scene, stage1_targets_for};
use brepsplat_core::splat::{render_channels, stage1_loss_and_grad, Channels};

fn render(c: &mut Criterion) {
    let (gs, cam) = gradient_scene(&mut ChaCha8Rng::seed_from_u64(2), 32, 8, 64);
    c.bench_function("render_64x64_32_splats", |b| {
        b.iter(|| render_channels(black_box(&gs), &cam, Channels::all()).unwrap())
    });
}

fn stage1(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (gs, cam) = gradient_scene(&mut rng, 16, 4, 32);
    let targets = stage1_targets_for(&mut rng, &gs, &cam);
    let cfg = Default::default();
    c.bench_function("stage1_loss_and_grad_32x32", |b| {
        b.iter(|| stage1_loss_and_grad(black_box(&gs), &cam, &targets, &cfg).unwrap())
    });
}

criterion_group!(benches, render, stage1);
criterion_main!(benches);
