//! The inter-slice 3D encoder: residual blocks that shrink only the depth
//! axis until it reaches 3, then collapse channels so the depth slices can be
//! read as the channels of a 2D image.
//!
//! Tensor layout is `[batch, channels, W, H, D]`; only the last axis is ever
//! pooled.

use burn::module::Module;
use burn::nn::conv::{Conv3d, Conv3dConfig};
use burn::nn::{GroupNorm, GroupNormConfig, PaddingConfig3d};
use burn::tensor::activation::relu;
use burn::tensor::backend::Backend;
use burn::tensor::Tensor;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Target depth after shrinking: the channel count a 2D backbone expects.
pub const TARGET_DEPTH: usize = 3;

/// Architecture of the depth-shrinking encoder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShrinkConfig {
    pub input_depth: usize,
    /// Per-stage depth reduction factors; their product must equal
    /// `input_depth / 3`.
    pub factors: Vec<usize>,
    /// Per-stage channel widths.
    pub channels: Vec<usize>,
    /// Group count for group normalization.
    pub groups: usize,
}

impl ShrinkConfig {
    /// The paper's configuration for depth 108: factors (3, 3, 4).
    pub fn paper_default() -> ShrinkConfig {
        ShrinkConfig {
            input_depth: 108,
            factors: vec![3, 3, 4],
            channels: vec![32, 64, 128],
            groups: 8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.factors.len() != self.channels.len() {
            return Err(Error::Config(format!(
                "factors ({}) and channels ({}) must have the same length",
                self.factors.len(),
                self.channels.len()
            )));
        }
        if self.factors.iter().any(|&f| f == 0) {
            return Err(Error::Config("depth factors must be positive".into()));
        }
        if self.groups == 0 {
            return Err(Error::Config("group count must be positive".into()));
        }
        let product: usize = self.factors.iter().product();
        if self.input_depth % product != 0 || self.input_depth / product != TARGET_DEPTH {
            return Err(Error::Config(format!(
                "depth {} with factors {:?} does not reduce to {TARGET_DEPTH} \
                 (product {product})",
                self.input_depth, self.factors
            )));
        }
        for &c in &self.channels {
            if c == 0 || c % self.groups != 0 {
                return Err(Error::Config(format!(
                    "channel width {c} not divisible by group count {}",
                    self.groups
                )));
            }
        }
        Ok(())
    }

    /// Depth after each stage, e.g. 108 / (3,3,4) -> [36, 12, 3].
    pub fn stage_depths(&self) -> Vec<usize> {
        let mut d = self.input_depth;
        self.factors
            .iter()
            .map(|&f| {
                d /= f;
                d
            })
            .collect()
    }
}

/// Two 3x3x3 convolutions with group normalization and ReLU plus a residual
/// add; the shortcut is a 1x1x1 projection when channel counts differ.
#[derive(Module, Debug)]
pub struct ResBlock3d<B: Backend> {
    conv1: Conv3d<B>,
    norm1: GroupNorm<B>,
    conv2: Conv3d<B>,
    norm2: GroupNorm<B>,
    shortcut: Option<Conv3d<B>>,
}

impl<B: Backend> ResBlock3d<B> {
    pub fn new(in_ch: usize, out_ch: usize, groups: usize, device: &B::Device) -> Self {
        let conv = |ci, co| {
            Conv3dConfig::new([ci, co], [3, 3, 3])
                .with_padding(PaddingConfig3d::Explicit(1, 1, 1))
                .init(device)
        };
        let shortcut = (in_ch != out_ch).then(|| {
            Conv3dConfig::new([in_ch, out_ch], [1, 1, 1])
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

    pub fn forward(&self, x: Tensor<B, 5>) -> Tensor<B, 5> {
        self.forward_collect(x, &mut None)
    }

    /// Forward pass that optionally records the post-normalization
    /// activations (before the affine scale is anything but identity at
    /// initialization), for statistics checks.
    pub fn forward_collect(
        &self,
        x: Tensor<B, 5>,
        norm_sink: &mut Option<&mut Vec<Tensor<B, 5>>>,
    ) -> Tensor<B, 5> {
        let residual = match &self.shortcut {
            Some(proj) => proj.forward(x.clone()),
            None => x.clone(),
        };
        let h = self.norm1.forward(self.conv1.forward(x));
        if let Some(sink) = norm_sink.as_deref_mut() {
            sink.push(h.clone());
        }
        let h = self.conv2.forward(relu(h));
        let h = self.norm2.forward(h);
        if let Some(sink) = norm_sink.as_deref_mut() {
            sink.push(h.clone());
        }
        relu(h) + residual
    }
}

/// Depth-wise max pooling with kernel and stride `(1, 1, f)`.
fn pool_depth<B: Backend>(x: Tensor<B, 5>, factor: usize) -> Tensor<B, 5> {
    if factor == 1 {
        return x;
    }
    let [n, c, w, h, d] = x.dims();
    debug_assert_eq!(d % factor, 0);
    let grouped: Tensor<B, 6> = x.reshape([n, c, w, h, d / factor, factor]);
    grouped.max_dim(5).reshape([n, c, w, h, d / factor])
}

/// The depth-shrinking encoder.
#[derive(Module, Debug)]
pub struct ShrinkEncoder<B: Backend> {
    stages: Vec<ResBlock3d<B>>,
    collapse: Conv3d<B>,
    factors: Vec<usize>,
    input_depth: usize,
}

/// Build an encoder with deterministic initialization for `seed`.
pub fn build_shrink_encoder<B: Backend>(
    cfg: &ShrinkConfig,
    seed: u64,
    device: &B::Device,
) -> Result<ShrinkEncoder<B>> {
    B::seed(device, seed);
    ShrinkEncoder::new(cfg, device)
}

impl<B: Backend> ShrinkEncoder<B> {
    pub fn new(cfg: &ShrinkConfig, device: &B::Device) -> Result<Self> {
        cfg.validate()?;
        let mut stages = Vec::with_capacity(cfg.factors.len());
        let mut in_ch = 1;
        for &out_ch in &cfg.channels {
            stages.push(ResBlock3d::new(in_ch, out_ch, cfg.groups, device));
            in_ch = out_ch;
        }
        let collapse = Conv3dConfig::new([in_ch, 1], [1, 1, 1]).init(device);
        Ok(ShrinkEncoder {
            stages,
            collapse,
            factors: cfg.factors.clone(),
            input_depth: cfg.input_depth,
        })
    }

    pub fn input_depth(&self) -> usize {
        self.input_depth
    }

    pub fn factors(&self) -> &[usize] {
        &self.factors
    }

    /// Compress `[1, 1, W, H, D]` into a `[1, 3, W, H]` image plus one skip
    /// volume per stage (depths strictly decreasing).
    pub fn forward(&self, vol: Tensor<B, 5>) -> Result<(Tensor<B, 4>, Vec<Tensor<B, 5>>)> {
        self.forward_collect(vol, &mut None)
    }

    /// Like [`Self::forward`] but records post-normalization activations.
    pub fn forward_collect(
        &self,
        vol: Tensor<B, 5>,
        norm_sink: &mut Option<&mut Vec<Tensor<B, 5>>>,
    ) -> Result<(Tensor<B, 4>, Vec<Tensor<B, 5>>)> {
        let [n, c, w, h, d] = vol.dims();
        if c != 1 || d != self.input_depth {
            return Err(Error::ShapeMismatch {
                context: "shrink_forward input",
                expected: vec![n, 1, w, h, self.input_depth],
                actual: vec![n, c, w, h, d],
            });
        }
        let mut x = vol;
        let mut skips = Vec::with_capacity(self.stages.len());
        for (stage, &factor) in self.stages.iter().zip(&self.factors) {
            x = stage.forward_collect(x, norm_sink);
            x = pool_depth(x, factor);
            // W and H must never be altered by a stage
            let [_, _, sw, sh, _] = x.dims();
            debug_assert_eq!((sw, sh), (w, h));
            skips.push(x.clone());
        }
        let collapsed = self.collapse.forward(x);
        let [_, _, _, _, depth] = collapsed.dims();
        if depth != TARGET_DEPTH {
            return Err(Error::ShapeMismatch {
                context: "shrink_forward output depth",
                expected: vec![TARGET_DEPTH],
                actual: vec![depth],
            });
        }
        // [1, 1, W, H, 3] -> [1, 3, W, H]: the residual depth axis becomes
        // the channel axis of a 2D image.
        let image = collapsed.reshape([n, w, h, TARGET_DEPTH]).permute([0, 3, 1, 2]);
        let total: f64 = burn::tensor::ElementConversion::elem(image.clone().sum().into_scalar());
        if !total.is_finite() {
            return Err(Error::Config(
                "non-finite activations in shrink encoder output".into(),
            ));
        }
        Ok((image, skips))
    }
}

/// Invert the depth-to-channel transposition of the encoder bridge:
/// `[1, 3*C, W, H]` -> `[1, C, W, H, 3]`.
pub fn channels_to_depth<B: Backend>(feat: Tensor<B, 4>) -> Result<Tensor<B, 5>> {
    let [n, c, w, h] = feat.dims();
    if c % TARGET_DEPTH != 0 {
        return Err(Error::ShapeMismatch {
            context: "channels_to_depth",
            expected: vec![n, TARGET_DEPTH, w, h],
            actual: vec![n, c, w, h],
        });
    }
    let per_slice = c / TARGET_DEPTH;
    let grouped: Tensor<B, 5> = feat.reshape([n, TARGET_DEPTH, per_slice, w, h]);
    Ok(grouped.permute([0, 2, 3, 4, 1]))
}
