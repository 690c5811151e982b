//! The complete network: shrink encoder, 2D backbone, mirrored decoder.

use burn::module::Module;
use burn::tensor::backend::Backend;
use burn::tensor::Tensor;
use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::backbone::{build_backbone, BackboneArch, BackboneModel};
use crate::decoder::{Decoder2d, Decoder3d, DecoderConfig};
use crate::error::{Error, Result};
use crate::shrink::{ShrinkConfig, ShrinkEncoder};
use crate::volume::{nested_to_labels, LabelMap, NestedMask};

/// Complete architecture description; everything needed to rebuild the
/// network from a checkpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetConfig {
    pub shrink: ShrinkConfig,
    pub backbone: BackboneArch,
    pub decoder: DecoderConfig,
}

impl NetConfig {
    /// Paper-scale network: depth 108, EfficientNet-B0.
    pub fn paper_default() -> NetConfig {
        NetConfig {
            shrink: ShrinkConfig::paper_default(),
            backbone: BackboneArch::EfficientNetB0,
            decoder: DecoderConfig::paper_default(),
        }
    }

    /// Desk-scale network for tests and smoke runs: depth 12, tiny CNN
    /// backbone. Accepts volumes of `W x H x 12` with W, H divisible by 8.
    pub fn toy_default() -> NetConfig {
        NetConfig {
            shrink: ShrinkConfig {
                input_depth: 12,
                factors: vec![2, 2],
                channels: vec![8, 8],
                groups: 4,
            },
            backbone: BackboneArch::Cnn {
                channels: vec![8, 16, 16],
            },
            decoder: DecoderConfig {
                channels_2d: vec![16, 8],
                bridge_channels: 6,
                channels_3d: vec![8, 8],
                groups: 4,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.shrink.validate()?;
        self.backbone.validate()?;
        self.decoder.validate(&self.backbone.tap_spec(), &self.shrink)
    }
}

/// Encoder, backbone and decoder wired together.
#[derive(Module, Debug)]
pub struct DimShrinkNet<B: Backend> {
    pub encoder: ShrinkEncoder<B>,
    pub backbone: BackboneModel<B>,
    pub decoder2d: Decoder2d<B>,
    pub decoder3d: Decoder3d<B>,
}

/// Build a network with deterministic initialization for `seed`.
pub fn build_net<B: Backend>(
    cfg: &NetConfig,
    seed: u64,
    device: &B::Device,
) -> Result<DimShrinkNet<B>> {
    cfg.validate()?;
    B::seed(device, seed);
    let encoder = ShrinkEncoder::new(&cfg.shrink, device)?;
    let backbone = build_backbone(&cfg.backbone, device);
    let taps = backbone.tap_spec();
    let decoder2d = Decoder2d::new(&taps, &cfg.decoder, device);
    let decoder3d = Decoder3d::new(&cfg.decoder, &cfg.shrink, device);
    Ok(DimShrinkNet {
        encoder,
        backbone,
        decoder2d,
        decoder3d,
    })
}

impl<B: Backend> DimShrinkNet<B> {
    /// Map a `[1, 1, W, H, D]` volume to `[1, 3, W, H, D]` per-voxel
    /// probabilities for the nested regions (channel order WT, TC, ET).
    pub fn forward(&self, vol: Tensor<B, 5>) -> Result<Tensor<B, 5>> {
        let [_, _, w, h, _] = vol.dims();
        let (image, skips) = self.encoder.forward(vol)?;
        let taps = self.backbone.forward(image)?;
        let bridge = self.decoder2d.forward(taps, [w, h])?;
        self.decoder3d.forward(bridge, &skips)
    }

    /// Replace the backbone with a non-trainable copy of itself; its
    /// parameters then receive no gradients and survive optimizer steps
    /// untouched.
    pub fn freeze_backbone(mut self) -> Self {
        self.backbone = self.backbone.no_grad();
        self
    }
}

/// Split `[1, 3, W, H, D]` probabilities into three `W x H x D` arrays in
/// WT, TC, ET order.
pub fn probs_to_arrays<B: Backend>(probs: Tensor<B, 5>) -> Result<[Array3<f32>; 3]> {
    let [n, c, w, h, d] = probs.dims();
    if n != 1 || c != 3 {
        return Err(Error::ShapeMismatch {
            context: "probs_to_arrays",
            expected: vec![1, 3, w, h, d],
            actual: vec![n, c, w, h, d],
        });
    }
    let flat: Vec<f32> = probs
        .into_data()
        .to_vec()
        .map_err(|e| Error::Config(format!("tensor readback failed: {e:?}")))?;
    let len = w * h * d;
    let mut out = Vec::with_capacity(3);
    for ch in 0..3 {
        let slice = flat[ch * len..(ch + 1) * len].to_vec();
        out.push(
            Array3::from_shape_vec((w, h, d), slice).expect("shape matches slice length"),
        );
    }
    let [wt, tc, et]: [Array3<f32>; 3] = out.try_into().expect("exactly three channels");
    Ok([wt, tc, et])
}

/// Threshold probabilities into a label map plus the binary region masks.
pub fn probs_to_labels<B: Backend>(
    probs: Tensor<B, 5>,
    threshold: f32,
) -> Result<(LabelMap, NestedMask)> {
    let [wt, tc, et] = probs_to_arrays(probs)?;
    let labels = nested_to_labels(&wt, &tc, &et, threshold)?;
    let mask = crate::volume::labels_to_nested(&labels);
    Ok((labels, mask))
}
