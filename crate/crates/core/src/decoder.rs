//! The mirrored decoder: 2D feature maps from the backbone are merged back up
//! to full resolution, re-expressed as a 3-slice volume and grown back to the
//! input depth with the encoder's skip volumes.

use burn::module::Module;
use burn::nn::conv::{Conv2d, Conv2dConfig, Conv3d, Conv3dConfig};
use burn::nn::{GroupNorm, GroupNormConfig, PaddingConfig2d};
use burn::tensor::activation::relu;
use burn::tensor::backend::Backend;
use burn::tensor::module::interpolate;
use burn::tensor::ops::{InterpolateMode, InterpolateOptions};
use burn::tensor::Tensor;
use serde::{Deserialize, Serialize};

use crate::backbone::{norm_groups, TapSpec};
use crate::error::{Error, Result};
use crate::shrink::{channels_to_depth, ResBlock3d, ShrinkConfig, TARGET_DEPTH};

/// Architecture of the two decoding halves.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoderConfig {
    /// Output widths of the 2D merge blocks, deepest tap first; one entry per
    /// tap pair, so `taps - 1` entries.
    pub channels_2d: Vec<usize>,
    /// Channel width at full 2D resolution, must be divisible by 3 so the
    /// channels can be folded back into 3 depth slices.
    pub bridge_channels: usize,
    /// Output widths of the 3D blocks, deepest first; one entry per encoder
    /// stage.
    pub channels_3d: Vec<usize>,
    /// Preferred group count for group normalization; reduced per layer when
    /// it does not divide the channel width.
    pub groups: usize,
}

impl DecoderConfig {
    /// Companion to the paper-scale encoder and the EfficientNet-B0 taps.
    pub fn paper_default() -> DecoderConfig {
        DecoderConfig {
            channels_2d: vec![128, 64, 48, 32],
            bridge_channels: 24,
            channels_3d: vec![128, 64, 32],
            groups: 8,
        }
    }

    pub fn validate(&self, taps: &TapSpec, shrink: &ShrinkConfig) -> Result<()> {
        if self.channels_2d.len() + 1 != taps.taps.len() {
            return Err(Error::Config(format!(
                "channels_2d has {} entries but the backbone declares {} taps",
                self.channels_2d.len(),
                taps.taps.len()
            )));
        }
        if self.bridge_channels == 0 || self.bridge_channels % TARGET_DEPTH != 0 {
            return Err(Error::Config(format!(
                "bridge_channels {} must be a positive multiple of {TARGET_DEPTH}",
                self.bridge_channels
            )));
        }
        if self.channels_3d.len() != shrink.channels.len() {
            return Err(Error::Config(format!(
                "channels_3d has {} entries but the encoder has {} stages",
                self.channels_3d.len(),
                shrink.channels.len()
            )));
        }
        if self.channels_2d.iter().chain(&self.channels_3d).any(|&c| c == 0) {
            return Err(Error::Config("decoder channel widths must be positive".into()));
        }
        Ok(())
    }
}

/// 2D counterpart of [`ResBlock3d`].
#[derive(Module, Debug)]
pub struct ResBlock2d<B: Backend> {
    conv1: Conv2d<B>,
    norm1: GroupNorm<B>,
    conv2: Conv2d<B>,
    norm2: GroupNorm<B>,
    shortcut: Option<Conv2d<B>>,
}

impl<B: Backend> ResBlock2d<B> {
    pub fn new(in_ch: usize, out_ch: usize, groups: usize, device: &B::Device) -> Self {
        let conv = |ci, co| {
            Conv2dConfig::new([ci, co], [3, 3])
                .with_padding(PaddingConfig2d::Explicit(1, 1, 1, 1))
                .init(device)
        };
        let groups = norm_groups(groups, out_ch);
        let shortcut = (in_ch != out_ch).then(|| {
            Conv2dConfig::new([in_ch, out_ch], [1, 1])
                .with_bias(false)
                .init(device)
        });
        Self {
            conv1: conv(in_ch, out_ch),
            norm1: GroupNormConfig::new(groups, out_ch).init(device),
            conv2: conv(out_ch, out_ch),
            norm2: GroupNormConfig::new(groups, out_ch).init(device),
            shortcut,
        }
    }

    pub fn forward(&self, x: Tensor<B, 4>) -> Tensor<B, 4> {
        let residual = match &self.shortcut {
            Some(proj) => proj.forward(x.clone()),
            None => x.clone(),
        };
        let h = relu(self.norm1.forward(self.conv1.forward(x)));
        let h = self.norm2.forward(self.conv2.forward(h));
        relu(h) + residual
    }
}

/// Sigmoid computed in the tensor's own precision. The stock activation
/// round-trips through f32 regardless of dtype, flattening f64 outputs to
/// f32 resolution; the tanh form keeps full precision and stays finite at
/// large |logit|.
fn sigmoid_full<B: Backend, const D: usize>(x: Tensor<B, D>) -> Tensor<B, D> {
    x.div_scalar(2.0).tanh().add_scalar(1.0).div_scalar(2.0)
}

fn upsample2d<B: Backend>(x: Tensor<B, 4>, size: [usize; 2]) -> Tensor<B, 4> {
    interpolate(x, size, InterpolateOptions::new(InterpolateMode::Nearest))
}

/// Merge the backbone taps from the deepest up to full 2D resolution.
#[derive(Module, Debug)]
pub struct Decoder2d<B: Backend> {
    merges: Vec<ResBlock2d<B>>,
    full: ResBlock2d<B>,
}

impl<B: Backend> Decoder2d<B> {
    pub fn new(taps: &TapSpec, cfg: &DecoderConfig, device: &B::Device) -> Self {
        let tap_channels: Vec<usize> = taps.taps.iter().map(|t| t.channels).collect();
        let mut merges = Vec::with_capacity(cfg.channels_2d.len());
        let mut prev = *tap_channels.last().expect("validated tap spec");
        for (j, &out_ch) in cfg.channels_2d.iter().enumerate() {
            let tap_ch = tap_channels[tap_channels.len() - 2 - j];
            merges.push(ResBlock2d::new(prev + tap_ch, out_ch, cfg.groups, device));
            prev = out_ch;
        }
        let full = ResBlock2d::new(prev, cfg.bridge_channels, cfg.groups, device);
        Self { merges, full }
    }

    /// Taps are given shallowest first, as produced by the backbone; the
    /// result is `[1, bridge_channels, W, H]` at full resolution.
    pub fn forward(&self, taps: Vec<Tensor<B, 4>>, full_size: [usize; 2]) -> Result<Tensor<B, 4>> {
        if taps.len() != self.merges.len() + 1 {
            return Err(Error::ShapeMismatch {
                context: "decoder tap count",
                expected: vec![self.merges.len() + 1],
                actual: vec![taps.len()],
            });
        }
        let mut x = taps.last().expect("checked above").clone();
        for (j, merge) in self.merges.iter().enumerate() {
            let tap = &taps[taps.len() - 2 - j];
            let [_, _, tw, th] = tap.dims();
            x = upsample2d(x, [tw, th]);
            x = merge.forward(Tensor::cat(vec![x, tap.clone()], 1));
        }
        x = upsample2d(x, full_size);
        Ok(self.full.forward(x))
    }
}

/// Nearest-neighbor upsampling along the depth axis only.
pub fn upsample_depth<B: Backend>(x: Tensor<B, 5>, factor: usize) -> Tensor<B, 5> {
    if factor == 1 {
        return x;
    }
    let [n, c, w, h, d] = x.dims();
    let expanded: Tensor<B, 6> = x
        .reshape([n, c, w, h, d, 1])
        .expand([n, c, w, h, d, factor]);
    expanded.reshape([n, c, w, h, d * factor])
}

/// Grow the 2D bridge features back to the input depth, merging the encoder
/// skip volumes, and emit per-voxel probabilities for the 3 nested regions.
#[derive(Module, Debug)]
pub struct Decoder3d<B: Backend> {
    blocks: Vec<ResBlock3d<B>>,
    head: Conv3d<B>,
    factors: Vec<usize>,
}

impl<B: Backend> Decoder3d<B> {
    pub fn new(cfg: &DecoderConfig, shrink: &ShrinkConfig, device: &B::Device) -> Self {
        let mut blocks = Vec::with_capacity(cfg.channels_3d.len());
        let mut prev = cfg.bridge_channels / TARGET_DEPTH;
        // deepest encoder stage first
        for (j, &out_ch) in cfg.channels_3d.iter().enumerate() {
            let skip_ch = shrink.channels[shrink.channels.len() - 1 - j];
            blocks.push(ResBlock3d::new(
                prev + skip_ch,
                out_ch,
                norm_groups(cfg.groups, out_ch),
                device,
            ));
            prev = out_ch;
        }
        let head = Conv3dConfig::new([prev, TARGET_DEPTH], [1, 1, 1]).init(device);
        let mut factors = shrink.factors.clone();
        factors.reverse();
        Self {
            blocks,
            head,
            factors,
        }
    }

    /// `bridge` is `[1, bridge_channels, W, H]`; `skips` come from the
    /// encoder, shallowest first. Returns sigmoid probabilities
    /// `[1, 3, W, H, D]`.
    pub fn forward(&self, bridge: Tensor<B, 4>, skips: &[Tensor<B, 5>]) -> Result<Tensor<B, 5>> {
        if skips.len() != self.blocks.len() {
            return Err(Error::ShapeMismatch {
                context: "decoder skip count",
                expected: vec![self.blocks.len()],
                actual: vec![skips.len()],
            });
        }
        let mut x = channels_to_depth(bridge)?;
        for (j, block) in self.blocks.iter().enumerate() {
            let skip = &skips[skips.len() - 1 - j];
            let (xd, sd) = (x.dims()[4], skip.dims()[4]);
            if xd != sd {
                return Err(Error::ShapeMismatch {
                    context: "decoder skip depth",
                    expected: vec![xd],
                    actual: vec![sd],
                });
            }
            x = block.forward(Tensor::cat(vec![x, skip.clone()], 1));
            x = upsample_depth(x, self.factors[j]);
        }
        Ok(sigmoid_full(self.head.forward(x)))
    }
}
