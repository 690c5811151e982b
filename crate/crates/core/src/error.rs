use std::path::PathBuf;

/// Errors produced by the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),

    #[error("failed to read NIfTI header from {path}: {source}")]
    NiftiHeader {
        path: PathBuf,
        #[source]
        source: nifti::NiftiError,
    },

    #[error("{path}: expected a 3D volume, got {ndim} dimensions")]
    NotAVolume { path: PathBuf, ndim: usize },

    #[error("{path}: volume contains non-finite values")]
    NonFiniteVoxels { path: PathBuf },

    #[error("failed to write NIfTI file {path}: {source}")]
    NiftiWrite {
        path: PathBuf,
        #[source]
        source: nifti::NiftiError,
    },

    #[error("crop target {target:?} exceeds volume dims {dims:?}")]
    CropTooLarge { target: [usize; 3], dims: [usize; 3] },

    #[error("cannot z-score normalize a constant volume (zero variance)")]
    ConstantVolume,

    #[error("unexpected label value {value} (expected 0, 1, 2 or 4)")]
    InvalidLabel { value: u8 },

    #[error("threshold {value} outside the open interval (0, 1)")]
    InvalidThreshold { value: f32 },

    #[error("uncrop geometry mismatch: block {block:?} at offset {offset:?} does not fit in {orig:?}")]
    UncropGeometry {
        block: [usize; 3],
        offset: [usize; 3],
        orig: [usize; 3],
    },

    #[error("shape mismatch in {context}: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        context: &'static str,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("backbone {0:?} is already registered")]
    DuplicateBackbone(String),

    #[error("no backbone registered under {0:?}")]
    UnknownBackbone(String),

    #[error("weight tensor {tensor:?}: {detail}")]
    WeightTensor { tensor: String, detail: String },

    #[error("failed to load weights from {path}: {detail}")]
    WeightFile { path: PathBuf, detail: String },

    #[error("non-finite loss at epoch {epoch} on case {case:?}")]
    NonFiniteLoss { epoch: usize, case: String },

    #[error("training dataset is empty")]
    EmptyDataset,

    #[error("cannot aggregate an empty metrics list")]
    EmptyMetrics,

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("missing modality {0:?} for ensemble prediction")]
    MissingModality(String),

    #[error("{0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
