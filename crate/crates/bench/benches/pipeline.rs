//! End-to-end and loss benchmarks on the desk-scale configuration.

use burn::backend::ndarray::{NdArray, NdArrayDevice};
use burn::tensor::{Distribution, Tensor};
use criterion::{criterion_group, criterion_main, Criterion};
use dimshrink_core::{
    build_net, combined_loss, make_phantom, mask_to_tensor, soft_dice, volume_to_tensor,
    labels_to_nested, NetConfig, DICE_EPSILON,
};

type B = NdArray<f32>;

fn device() -> NdArrayDevice {
    Default::default()
}

fn bench_forward(c: &mut Criterion) {
    let dev = device();
    let net = build_net::<B>(&NetConfig::toy_default(), 0, &dev).unwrap();
    let vol = Tensor::<B, 5>::random([1, 1, 32, 32, 12], Distribution::Default, &dev);
    c.bench_function("forward_toy_32x32x12", |b| {
        b.iter(|| net.forward(vol.clone()).unwrap())
    });
}

fn bench_loss(c: &mut Criterion) {
    let dev = device();
    let phantom = make_phantom(0, [32, 32, 12]).unwrap();
    let mask = labels_to_nested(&phantom.labels);
    let target = mask_to_tensor::<B>(&mask, &dev);
    let pred = Tensor::<B, 5>::random(target.dims(), Distribution::Uniform(0.01, 0.99), &dev);
    c.bench_function("soft_dice_32x32x12", |b| {
        b.iter(|| soft_dice(pred.clone(), target.clone(), DICE_EPSILON).unwrap())
    });
    c.bench_function("combined_loss_32x32x12", |b| {
        b.iter(|| combined_loss(pred.clone(), target.clone(), DICE_EPSILON).unwrap())
    });
}

fn bench_shrink_encoder(c: &mut Criterion) {
    let dev = device();
    let net = build_net::<B>(&NetConfig::toy_default(), 0, &dev).unwrap();
    let phantom = make_phantom(1, [32, 32, 12]).unwrap();
    let vol = volume_to_tensor::<B>(&phantom.volume.data, &dev);
    c.bench_function("shrink_encoder_32x32x12", |b| {
        b.iter(|| net.encoder.forward(vol.clone()).unwrap())
    });
}

criterion_group!(benches, bench_forward, bench_loss, bench_shrink_encoder);
criterion_main!(benches);
