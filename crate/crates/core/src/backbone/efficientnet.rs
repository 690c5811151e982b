//! EfficientNet-B0 feature extractor: the reference pretrained backbone.
//!
//! Only the convolutional trunk is modelled; the classifier head has no role
//! here and is dropped. Taps are taken after the last block of the stages
//! producing 16, 24, 40, 112 and 320 channels (strides 2..32).

use burn::module::Module;
use burn::nn::conv::{Conv2d, Conv2dConfig};
use burn::nn::{BatchNorm, BatchNormConfig, PaddingConfig2d};
use burn::tensor::activation::{sigmoid, silu};
use burn::tensor::backend::Backend;
use burn::tensor::Tensor;

/// (expand_ratio, kernel, stride, in_channels, out_channels, repeats)
const BLOCK_TABLE: [(usize, usize, usize, usize, usize, usize); 7] = [
    (1, 3, 1, 32, 16, 1),
    (6, 3, 2, 16, 24, 2),
    (6, 5, 2, 24, 40, 2),
    (6, 3, 2, 40, 80, 3),
    (6, 5, 1, 80, 112, 3),
    (6, 5, 2, 112, 192, 4),
    (6, 3, 1, 192, 320, 1),
];

/// Stages after whose last block a tap is emitted (indices into BLOCK_TABLE).
const TAP_STAGES: [usize; 5] = [0, 1, 2, 4, 6];

/// Conv + batch norm + optional SiLU.
#[derive(Module, Debug)]
struct ConvNorm<B: Backend> {
    conv: Conv2d<B>,
    norm: BatchNorm<B>,
    act: bool,
}

impl<B: Backend> ConvNorm<B> {
    #[allow(clippy::too_many_arguments)]
    fn new(
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        groups: usize,
        act: bool,
        device: &B::Device,
    ) -> Self {
        let pad = (kernel - 1) / 2;
        let conv = Conv2dConfig::new([in_ch, out_ch], [kernel, kernel])
            .with_stride([stride, stride])
            .with_padding(PaddingConfig2d::Explicit(pad, pad, pad, pad))
            .with_groups(groups)
            .with_bias(false)
            .init(device);
        let norm = BatchNormConfig::new(out_ch).init(device);
        Self { conv, norm, act }
    }

    fn forward(&self, x: Tensor<B, 4>) -> Tensor<B, 4> {
        let x = self.norm.forward(self.conv.forward(x));
        if self.act {
            silu(x)
        } else {
            x
        }
    }
}

/// Channel attention over globally pooled features.
#[derive(Module, Debug)]
struct SqueezeExcite<B: Backend> {
    reduce: Conv2d<B>,
    expand: Conv2d<B>,
}

impl<B: Backend> SqueezeExcite<B> {
    fn new(channels: usize, squeeze: usize, device: &B::Device) -> Self {
        let reduce = Conv2dConfig::new([channels, squeeze], [1, 1]).init(device);
        let expand = Conv2dConfig::new([squeeze, channels], [1, 1]).init(device);
        Self { reduce, expand }
    }

    fn forward(&self, x: Tensor<B, 4>) -> Tensor<B, 4> {
        let pooled = x.clone().mean_dim(3).mean_dim(2);
        let scale = sigmoid(self.expand.forward(silu(self.reduce.forward(pooled))));
        x * scale
    }
}

/// Mobile inverted bottleneck: expand 1x1, depthwise kxk, squeeze-excite,
/// project 1x1, residual when the shapes allow it.
#[derive(Module, Debug)]
struct MbConv<B: Backend> {
    expand: Option<ConvNorm<B>>,
    depthwise: ConvNorm<B>,
    se: SqueezeExcite<B>,
    project: ConvNorm<B>,
    residual: bool,
}

impl<B: Backend> MbConv<B> {
    fn new(
        expand_ratio: usize,
        kernel: usize,
        stride: usize,
        in_ch: usize,
        out_ch: usize,
        device: &B::Device,
    ) -> Self {
        let mid = in_ch * expand_ratio;
        let expand = (mid != in_ch).then(|| ConvNorm::new(in_ch, mid, 1, 1, 1, true, device));
        let depthwise = ConvNorm::new(mid, mid, kernel, stride, mid, true, device);
        let se = SqueezeExcite::new(mid, (in_ch / 4).max(1), device);
        let project = ConvNorm::new(mid, out_ch, 1, 1, 1, false, device);
        let residual = stride == 1 && in_ch == out_ch;
        Self {
            expand,
            depthwise,
            se,
            project,
            residual,
        }
    }

    fn forward(&self, input: Tensor<B, 4>) -> Tensor<B, 4> {
        let mut x = input.clone();
        if let Some(expand) = &self.expand {
            x = expand.forward(x);
        }
        x = self.project.forward(self.se.forward(self.depthwise.forward(x)));
        if self.residual {
            x + input
        } else {
            x
        }
    }
}

/// The B0 trunk with declared taps.
#[derive(Module, Debug)]
pub struct EfficientNetB0<B: Backend> {
    stem: ConvNorm<B>,
    blocks: Vec<MbConv<B>>,
    tap_after: Vec<usize>,
}

impl<B: Backend> EfficientNetB0<B> {
    pub fn new(device: &B::Device) -> Self {
        let stem = ConvNorm::new(3, 32, 3, 2, 1, true, device);
        let mut blocks = Vec::new();
        let mut tap_after = Vec::new();
        for (stage, &(expand, kernel, stride, in_ch, out_ch, repeats)) in
            BLOCK_TABLE.iter().enumerate()
        {
            for rep in 0..repeats {
                let (s, i) = if rep == 0 { (stride, in_ch) } else { (1, out_ch) };
                blocks.push(MbConv::new(expand, kernel, s, i, out_ch, device));
            }
            if TAP_STAGES.contains(&stage) {
                tap_after.push(blocks.len() - 1);
            }
        }
        Self {
            stem,
            blocks,
            tap_after,
        }
    }

    pub fn forward(&self, image: Tensor<B, 4>) -> Vec<Tensor<B, 4>> {
        let mut taps = Vec::with_capacity(self.tap_after.len());
        let mut x = self.stem.forward(image);
        for (i, block) in self.blocks.iter().enumerate() {
            x = block.forward(x);
            if self.tap_after.contains(&i) {
                taps.push(x.clone());
            }
        }
        taps
    }
}
