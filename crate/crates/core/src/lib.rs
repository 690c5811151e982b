//! Volumetric segmentation built around a depth-shrinking 3D encoder, a
//! pluggable 2D classification backbone and a mirrored 2D→3D decoder.

pub mod backbone;
pub mod decoder;
pub mod error;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod nifti_io;
pub mod shrink;
pub mod synthetic;
pub mod trainer;
pub mod volume;

pub use backbone::{
    build_backbone, load_pretrained, save_weights, BackboneArch, BackboneModel, BackboneRegistry,
    Tap, TapSpec,
};
pub use decoder::DecoderConfig;
pub use error::{Error, Result};
pub use loss::{bce_loss, combined_loss, soft_dice, LossValue, DICE_EPSILON};
pub use model::{build_net, probs_to_arrays, probs_to_labels, DimShrinkNet, NetConfig};
pub use shrink::ShrinkConfig;
pub use metrics::{aggregate, cases_to_csv, dice_metric, CaseMetrics, RegionStats, Summary};
pub use synthetic::{make_phantom, make_phantom_with_noise, oracle_dice, Phantom};
pub use trainer::{
    ensemble_predict, history_csv, load_checkpoint, make_checkpoint, mask_to_tensor, predict,
    restore, save_checkpoint, train, train_resumed, volume_to_tensor, Checkpoint, EpochLog,
    PlateauSchedule, TrainCase, TrainConfig, TrainOutcome,
};
pub use volume::{
    center_crop, center_crop_labels, labels_to_nested, nested_to_labels, uncrop, zscore_normalize,
    LabelMap, Modality, NestedMask, NormRegion, Volume, BRATS_GRID, DEFAULT_CROP,
};
