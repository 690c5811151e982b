//! 3D volumes, label maps and the nested-region encoding.
//!
//! Axis order is `[x, y, z]` = `[W, H, D]`, matching the on-disk NIfTI layout.

use ndarray::{s, Array3, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The uncropped BraTS acquisition grid.
pub const BRATS_GRID: [usize; 3] = [240, 240, 155];

/// The crop size used for training, `192x160x108`.
pub const DEFAULT_CROP: [usize; 3] = [192, 160, 108];

/// MRI acquisition type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    T1,
    /// Post-contrast T1-weighted (T1ce in the BraTS file naming).
    T1Gd,
    T2,
    Flair,
}

impl Modality {
    pub const ALL: [Modality; 4] = [Modality::T1, Modality::T1Gd, Modality::T2, Modality::Flair];

    /// The filename suffix used by the BraTS dataset.
    pub fn suffix(self) -> &'static str {
        match self {
            Modality::T1 => "t1",
            Modality::T1Gd => "t1ce",
            Modality::T2 => "t2",
            Modality::Flair => "flair",
        }
    }

    pub fn from_suffix(s: &str) -> Option<Modality> {
        match s {
            "t1" => Some(Modality::T1),
            "t1ce" | "t1gd" => Some(Modality::T1Gd),
            "t2" => Some(Modality::T2),
            "flair" => Some(Modality::Flair),
            _ => None,
        }
    }
}

impl std::fmt::Display for Modality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.suffix())
    }
}

/// A single-modality scalar volume with crop provenance.
#[derive(Debug, Clone)]
pub struct Volume {
    /// Voxel intensities, indexed `[x, y, z]`.
    pub data: Array3<f32>,
    pub modality: Option<Modality>,
    /// Dimensions of the grid this volume was cut from.
    pub origin_dims: [usize; 3],
    /// Position of this volume inside the original grid.
    pub crop_offset: [usize; 3],
}

impl Volume {
    /// Wrap a raw array as an uncropped volume.
    pub fn new(data: Array3<f32>, modality: Option<Modality>) -> Volume {
        let dims = dims_of(&data);
        Volume {
            data,
            modality,
            origin_dims: dims,
            crop_offset: [0, 0, 0],
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        dims_of(&self.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// A BraTS label volume; every voxel is 0 (background), 1 (necrosis /
/// non-enhancing core), 2 (edema) or 4 (enhancing tumor).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    pub data: Array3<u8>,
}

impl LabelMap {
    pub fn new(data: Array3<u8>) -> Result<LabelMap> {
        for &v in data.iter() {
            if !matches!(v, 0 | 1 | 2 | 4) {
                return Err(Error::InvalidLabel { value: v });
            }
        }
        Ok(LabelMap { data })
    }

    pub fn dims(&self) -> [usize; 3] {
        dims_of_u8(&self.data)
    }
}

/// Binary masks of the three nested evaluation regions.
///
/// WT ⊇ TC ⊇ ET holds voxelwise for masks built by [`labels_to_nested`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NestedMask {
    pub wt: Array3<u8>,
    pub tc: Array3<u8>,
    pub et: Array3<u8>,
}

impl NestedMask {
    pub fn dims(&self) -> [usize; 3] {
        dims_of_u8(&self.wt)
    }

    /// Checks ET ⊆ TC ⊆ WT voxelwise.
    pub fn nesting_holds(&self) -> bool {
        Zip::from(&self.wt)
            .and(&self.tc)
            .and(&self.et)
            .all(|&w, &t, &e| e <= t && t <= w)
    }

    pub fn region(&self, name: &str) -> Option<&Array3<u8>> {
        match name {
            "wt" => Some(&self.wt),
            "tc" => Some(&self.tc),
            "et" => Some(&self.et),
            _ => None,
        }
    }
}

/// Region over which normalization statistics are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormRegion {
    /// Mean/std over every voxel of the (cropped) volume.
    #[default]
    Full,
    /// Mean/std over nonzero voxels only; the transform is still applied
    /// everywhere.
    Nonzero,
}

fn dims_of(a: &Array3<f32>) -> [usize; 3] {
    let d = a.dim();
    [d.0, d.1, d.2]
}

fn dims_of_u8(a: &Array3<u8>) -> [usize; 3] {
    let d = a.dim();
    [d.0, d.1, d.2]
}

/// Extract the centered `target` sub-block.
///
/// Offsets use `floor((dim - target) / 2)` per axis, so an odd difference
/// leaves the extra voxel on the high side.
pub fn center_crop(vol: &Volume, target: [usize; 3]) -> Result<Volume> {
    let dims = vol.dims();
    if target.iter().zip(&dims).any(|(t, d)| t > d) {
        return Err(Error::CropTooLarge { target, dims });
    }
    let off: Vec<usize> = dims.iter().zip(&target).map(|(d, t)| (d - t) / 2).collect();
    let data = vol
        .data
        .slice(s![
            off[0]..off[0] + target[0],
            off[1]..off[1] + target[1],
            off[2]..off[2] + target[2]
        ])
        .to_owned();
    Ok(Volume {
        data,
        modality: vol.modality,
        origin_dims: vol.origin_dims,
        crop_offset: [
            vol.crop_offset[0] + off[0],
            vol.crop_offset[1] + off[1],
            vol.crop_offset[2] + off[2],
        ],
    })
}

/// Center-crop a label map with the same parity rule as [`center_crop`].
pub fn center_crop_labels(labels: &LabelMap, target: [usize; 3]) -> Result<LabelMap> {
    let dims = labels.dims();
    if target.iter().zip(&dims).any(|(t, d)| t > d) {
        return Err(Error::CropTooLarge { target, dims });
    }
    let off: Vec<usize> = dims.iter().zip(&target).map(|(d, t)| (d - t) / 2).collect();
    let data = labels
        .data
        .slice(s![
            off[0]..off[0] + target[0],
            off[1]..off[1] + target[1],
            off[2]..off[2] + target[2]
        ])
        .to_owned();
    Ok(LabelMap { data })
}

/// Shift intensities to zero mean and unit variance.
///
/// Statistics are computed over `region`; the affine transform is applied to
/// the whole volume. Population variance (divide by N).
pub fn zscore_normalize(vol: &Volume, region: NormRegion) -> Result<Volume> {
    let values: Vec<f32> = match region {
        NormRegion::Full => vol.data.iter().copied().collect(),
        NormRegion::Nonzero => vol.data.iter().copied().filter(|&v| v != 0.0).collect(),
    };
    if values.is_empty() {
        return Err(Error::ConstantVolume);
    }
    let n = values.len() as f64;
    let mean = values.iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = values
        .iter()
        .map(|&v| {
            let d = v as f64 - mean;
            d * d
        })
        .sum::<f64>()
        / n;
    if var <= 0.0 {
        return Err(Error::ConstantVolume);
    }
    let std = var.sqrt();
    let data = vol.data.mapv(|v| ((v as f64 - mean) / std) as f32);
    Ok(Volume {
        data,
        modality: vol.modality,
        origin_dims: vol.origin_dims,
        crop_offset: vol.crop_offset,
    })
}

/// Expand BraTS labels into the three nested region masks.
///
/// WT = {1, 2, 4}, TC = {1, 4}, ET = {4}.
pub fn labels_to_nested(labels: &LabelMap) -> NestedMask {
    let wt = labels.data.mapv(|v| u8::from(matches!(v, 1 | 2 | 4)));
    let tc = labels.data.mapv(|v| u8::from(matches!(v, 1 | 4)));
    let et = labels.data.mapv(|v| u8::from(v == 4));
    NestedMask { wt, tc, et }
}

/// Collapse per-region probability channels back to BraTS labels.
///
/// Each channel is binarized at `threshold`, then the innermost set channel
/// wins, checked in order ET, TC, WT:
///
/// | wt | tc | et | label |
/// |----|----|----|-------|
/// |  * |  * |  1 |   4   |
/// |  * |  1 |  0 |   1   |
/// |  1 |  0 |  0 |   2   |
/// |  0 |  0 |  0 |   0   |
pub fn nested_to_labels(
    wt: &Array3<f32>,
    tc: &Array3<f32>,
    et: &Array3<f32>,
    threshold: f32,
) -> Result<LabelMap> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidThreshold { value: threshold });
    }
    if wt.dim() != tc.dim() || wt.dim() != et.dim() {
        return Err(Error::ShapeMismatch {
            context: "nested_to_labels",
            expected: wt.shape().to_vec(),
            actual: tc.shape().to_vec(),
        });
    }
    let mut data = Array3::<u8>::zeros(wt.dim());
    Zip::from(&mut data)
        .and(wt)
        .and(tc)
        .and(et)
        .for_each(|out, &w, &t, &e| {
            *out = if e >= threshold {
                4
            } else if t >= threshold {
                1
            } else if w >= threshold {
                2
            } else {
                0
            };
        });
    Ok(LabelMap { data })
}

/// Place a cropped label block back onto the original grid; everything
/// outside the block is background.
pub fn uncrop(labels: &LabelMap, offset: [usize; 3], orig: [usize; 3]) -> Result<LabelMap> {
    let block = labels.dims();
    if block.iter().zip(&offset).zip(&orig).any(|((b, o), g)| b + o > *g) {
        return Err(Error::UncropGeometry {
            block,
            offset,
            orig,
        });
    }
    let mut data = Array3::<u8>::zeros((orig[0], orig[1], orig[2]));
    data.slice_mut(s![
        offset[0]..offset[0] + block[0],
        offset[1]..offset[1] + block[1],
        offset[2]..offset[2] + block[2]
    ])
    .assign(&labels.data);
    Ok(LabelMap { data })
}
