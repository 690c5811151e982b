//! Pluggable 2D classification backbones exposed as multi-scale feature
//! extractors with declared tap points.

mod efficientnet;
mod pretrained;

pub use efficientnet::EfficientNetB0;
pub use pretrained::{load_pretrained, param_checksum, save_weights};

use std::collections::BTreeMap;

use burn::module::Module;
use burn::nn::conv::{Conv2d, Conv2dConfig};
use burn::nn::{GroupNorm, GroupNormConfig, PaddingConfig2d};
use burn::tensor::activation::relu;
use burn::tensor::backend::Backend;
use burn::tensor::Tensor;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One declared feature map of a backbone.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tap {
    pub name: String,
    /// Spatial downsampling factor relative to the input, a power of two.
    pub stride: usize,
    pub channels: usize,
}

/// Ordered tap declaration; strides strictly increase and the deepest tap is
/// the encoder bottleneck.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TapSpec {
    pub taps: Vec<Tap>,
}

impl TapSpec {
    pub fn validate(&self) -> Result<()> {
        if self.taps.len() < 3 {
            return Err(Error::Config(format!(
                "a backbone needs at least 3 taps, got {}",
                self.taps.len()
            )));
        }
        for pair in self.taps.windows(2) {
            if pair[1].stride <= pair[0].stride {
                return Err(Error::Config("tap strides must strictly increase".into()));
            }
        }
        for tap in &self.taps {
            if !tap.stride.is_power_of_two() || tap.channels == 0 {
                return Err(Error::Config(format!(
                    "invalid tap {:?}: stride must be a power of two, channels positive",
                    tap.name
                )));
            }
        }
        Ok(())
    }

    pub fn deepest_stride(&self) -> usize {
        self.taps.last().map(|t| t.stride).unwrap_or(1)
    }

    /// Expected spatial dims of every tap for a `W x H` input.
    pub fn expected_shapes(&self, w: usize, h: usize) -> Vec<[usize; 3]> {
        self.taps
            .iter()
            .map(|t| [t.channels, w / t.stride, h / t.stride])
            .collect()
    }
}

/// Serializable description of a backbone architecture, sufficient to
/// rebuild it from a checkpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BackboneArch {
    EfficientNetB0,
    /// A plain CNN: per stage one stride-2 conv + group norm + ReLU, with a
    /// tap after every stage.
    Cnn { channels: Vec<usize> },
}

impl BackboneArch {
    pub fn tap_spec(&self) -> TapSpec {
        match self {
            BackboneArch::EfficientNetB0 => TapSpec {
                taps: [(2usize, 16usize), (4, 24), (8, 40), (16, 112), (32, 320)]
                    .iter()
                    .map(|&(stride, channels)| Tap {
                        name: format!("stride{stride}"),
                        stride,
                        channels,
                    })
                    .collect(),
            },
            BackboneArch::Cnn { channels } => TapSpec {
                taps: channels
                    .iter()
                    .enumerate()
                    .map(|(i, &c)| Tap {
                        name: format!("stage{}", i + 1),
                        stride: 1 << (i + 1),
                        channels: c,
                    })
                    .collect(),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.tap_spec().validate()
    }
}

/// A registered backbone: architecture plus derived tap declaration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackboneEntry {
    pub arch: BackboneArch,
    pub taps: TapSpec,
}

/// Name-keyed registry of constructible backbones. Populated at startup,
/// read-only afterwards.
#[derive(Debug, Clone, Default)]
pub struct BackboneRegistry {
    entries: BTreeMap<String, BackboneEntry>,
}

impl BackboneRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry with the reference backbone pre-registered.
    pub fn with_defaults() -> Self {
        let mut reg = Self::new();
        reg.register("efficientnet-b0", BackboneArch::EfficientNetB0)
            .expect("empty registry");
        reg
    }

    pub fn register(&mut self, name: impl Into<String>, arch: BackboneArch) -> Result<()> {
        let name = name.into();
        if self.entries.contains_key(&name) {
            return Err(Error::DuplicateBackbone(name));
        }
        arch.validate()?;
        let taps = arch.tap_spec();
        self.entries.insert(name, BackboneEntry { arch, taps });
        Ok(())
    }

    pub fn entry(&self, name: &str) -> Result<&BackboneEntry> {
        self.entries
            .get(name)
            .ok_or_else(|| Error::UnknownBackbone(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn build<B: Backend>(&self, name: &str, device: &B::Device) -> Result<BackboneModel<B>> {
        let entry = self.entry(name)?;
        Ok(build_backbone(&entry.arch, device))
    }
}

/// Instantiate a backbone from its architecture description.
pub fn build_backbone<B: Backend>(arch: &BackboneArch, device: &B::Device) -> BackboneModel<B> {
    match arch {
        BackboneArch::EfficientNetB0 => {
            BackboneModel::EfficientNetB0(EfficientNetB0::new(device))
        }
        BackboneArch::Cnn { channels } => BackboneModel::Cnn(SimpleCnn::new(channels, device)),
    }
}

/// Any constructible backbone.
#[derive(Module, Debug)]
pub enum BackboneModel<B: Backend> {
    EfficientNetB0(EfficientNetB0<B>),
    Cnn(SimpleCnn<B>),
}

impl<B: Backend> BackboneModel<B> {
    pub fn tap_spec(&self) -> TapSpec {
        match self {
            BackboneModel::EfficientNetB0(_) => BackboneArch::EfficientNetB0.tap_spec(),
            BackboneModel::Cnn(cnn) => BackboneArch::Cnn {
                channels: cnn.channels(),
            }
            .tap_spec(),
        }
    }

    /// Run the backbone on a `[1, 3, W, H]` image and return the declared
    /// taps, shallowest first. The classification head is never part of the
    /// model.
    pub fn forward(&self, image: Tensor<B, 4>) -> Result<Vec<Tensor<B, 4>>> {
        let [_, c, w, h] = image.dims();
        if c != 3 {
            return Err(Error::ShapeMismatch {
                context: "backbone input channels",
                expected: vec![3],
                actual: vec![c],
            });
        }
        let deepest = self.tap_spec().deepest_stride();
        if w % deepest != 0 || h % deepest != 0 {
            return Err(Error::Config(format!(
                "backbone input {w}x{h} not divisible by deepest tap stride {deepest}"
            )));
        }
        let taps = match self {
            BackboneModel::EfficientNetB0(net) => net.forward(image),
            BackboneModel::Cnn(net) => net.forward(image),
        };
        debug_assert_eq!(taps.len(), self.tap_spec().taps.len());
        Ok(taps)
    }
}

/// Largest group count <= `preferred` that divides `channels`.
pub(crate) fn norm_groups(preferred: usize, channels: usize) -> usize {
    (1..=preferred.min(channels))
        .rev()
        .find(|g| channels % g == 0)
        .unwrap_or(1)
}

/// A minimal strided CNN used to demonstrate backbone generality and to keep
/// tests desk-scale.
#[derive(Module, Debug)]
pub struct SimpleCnn<B: Backend> {
    convs: Vec<Conv2d<B>>,
    norms: Vec<GroupNorm<B>>,
}

impl<B: Backend> SimpleCnn<B> {
    pub fn new(channels: &[usize], device: &B::Device) -> Self {
        let mut convs = Vec::with_capacity(channels.len());
        let mut norms = Vec::with_capacity(channels.len());
        let mut in_ch = 3;
        for &out_ch in channels {
            convs.push(
                Conv2dConfig::new([in_ch, out_ch], [3, 3])
                    .with_stride([2, 2])
                    .with_padding(PaddingConfig2d::Explicit(1, 1, 1, 1))
                    .init(device),
            );
            norms.push(GroupNormConfig::new(norm_groups(4, out_ch), out_ch).init(device));
            in_ch = out_ch;
        }
        Self { convs, norms }
    }

    pub fn channels(&self) -> Vec<usize> {
        self.convs.iter().map(|c| c.weight.dims()[0]).collect()
    }

    pub fn forward(&self, image: Tensor<B, 4>) -> Vec<Tensor<B, 4>> {
        let mut taps = Vec::with_capacity(self.convs.len());
        let mut x = image;
        for (conv, norm) in self.convs.iter().zip(&self.norms) {
            x = relu(norm.forward(conv.forward(x)));
            taps.push(x.clone());
        }
        taps
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use burn::backend::ndarray::NdArray;

    type B = NdArray<f32>;

    fn device() -> burn::backend::ndarray::NdArrayDevice {
        Default::default()
    }

    #[test]
    fn registry_defaults_and_duplicates() {
        let mut reg = BackboneRegistry::with_defaults();
        assert!(reg.entry("efficientnet-b0").is_ok());
        let err = reg
            .register("efficientnet-b0", BackboneArch::EfficientNetB0)
            .unwrap_err();
        assert!(matches!(err, Error::DuplicateBackbone(_)));
        assert!(matches!(
            reg.entry("resnet-50"),
            Err(Error::UnknownBackbone(_))
        ));
    }

    #[test]
    fn register_toy_cnn_and_build() {
        let mut reg = BackboneRegistry::with_defaults();
        reg.register("toy", BackboneArch::Cnn { channels: vec![8, 16, 32] })
            .unwrap();
        let entry = reg.entry("toy").unwrap();
        assert_eq!(
            entry.taps.taps.iter().map(|t| t.stride).collect::<Vec<_>>(),
            vec![2, 4, 8]
        );
        let model = reg.build::<B>("toy", &device()).unwrap();
        let taps = model
            .forward(Tensor::zeros([1, 3, 32, 32], &device()))
            .unwrap();
        assert_eq!(taps.len(), 3);
        assert_eq!(taps[0].dims(), [1, 8, 16, 16]);
        assert_eq!(taps[2].dims(), [1, 32, 4, 4]);
    }

    #[test]
    fn tap_spec_needs_three_taps() {
        let arch = BackboneArch::Cnn { channels: vec![8, 16] };
        assert!(arch.validate().is_err());
    }

    #[test]
    fn indivisible_input_rejected() {
        let model = build_backbone::<B>(&BackboneArch::Cnn { channels: vec![4, 8, 8] }, &device());
        let err = model
            .forward(Tensor::zeros([1, 3, 30, 32], &device()))
            .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn wrong_channel_count_rejected() {
        let model = build_backbone::<B>(&BackboneArch::Cnn { channels: vec![4, 8, 8] }, &device());
        let err = model
            .forward(Tensor::zeros([1, 1, 32, 32], &device()))
            .unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch { .. }));
    }

    #[test]
    fn tap_shapes_match_spec_for_random_sizes() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let arch = BackboneArch::Cnn { channels: vec![4, 8, 8] };
        let model = build_backbone::<B>(&arch, &device());
        let spec = arch.tap_spec();
        for _ in 0..5 {
            let w = 8 * rng.random_range(1..5usize);
            let h = 8 * rng.random_range(1..5usize);
            let taps = model.forward(Tensor::zeros([1, 3, w, h], &device())).unwrap();
            for (tap, expect) in taps.iter().zip(spec.expected_shapes(w, h)) {
                assert_eq!(tap.dims(), [1, expect[0], expect[1], expect[2]]);
            }
        }
    }
}
