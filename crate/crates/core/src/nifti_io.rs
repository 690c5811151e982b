//! NIfTI-1 reading and writing.
//!
//! The on-disk axis order `(W, H, D)` is preserved; label outputs are written
//! as unsigned 8-bit volumes.

use std::path::Path;

use ndarray::{Array3, Ix3};
use nifti::{IntoNdArray, NiftiObject, ReaderOptions};

use crate::error::{Error, Result};
use crate::volume::{LabelMap, Modality, Volume};

/// Read a 3D scalar volume from a `.nii` / `.nii.gz` file.
///
/// No normalization is applied; intensities are converted to `f32` with the
/// header's scaling slope/intercept honored by the reader.
pub fn load_volume(path: impl AsRef<Path>, modality: Option<Modality>) -> Result<Volume> {
    let path = path.as_ref();
    let data = read_array3::<f32>(path)?;
    let vol = Volume::new(data, modality);
    if !vol.is_finite() {
        return Err(Error::NonFiniteVoxels {
            path: path.to_owned(),
        });
    }
    Ok(vol)
}

/// Read a BraTS segmentation volume, validating the label alphabet.
pub fn load_labels(path: impl AsRef<Path>) -> Result<LabelMap> {
    let path = path.as_ref();
    let data = read_array3::<f32>(path)?;
    let mut bytes = Array3::<u8>::zeros(data.dim());
    for (out, &v) in bytes.iter_mut().zip(data.iter()) {
        if !v.is_finite() || v < 0.0 || v.fract() != 0.0 || v > u8::MAX as f32 {
            return Err(Error::InvalidLabel {
                value: v.clamp(0.0, 255.0) as u8,
            });
        }
        *out = v as u8;
    }
    LabelMap::new(bytes)
}

/// Write a label map as an unsigned 8-bit NIfTI volume.
pub fn save_labels(path: impl AsRef<Path>, labels: &LabelMap) -> Result<()> {
    let path = path.as_ref();
    nifti::writer::WriterOptions::new(path)
        .write_nifti(&labels.data)
        .map_err(|source| Error::NiftiWrite {
            path: path.to_owned(),
            source,
        })
}

/// Write a scalar volume as `f32` NIfTI.
pub fn save_volume(path: impl AsRef<Path>, vol: &Volume) -> Result<()> {
    let path = path.as_ref();
    nifti::writer::WriterOptions::new(path)
        .write_nifti(&vol.data)
        .map_err(|source| Error::NiftiWrite {
            path: path.to_owned(),
            source,
        })
}

fn read_array3<T>(path: &Path) -> Result<Array3<T>>
where
    T: nifti::DataElement,
{
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_owned()));
    }
    let obj = ReaderOptions::new()
        .read_file(path)
        .map_err(|source| Error::NiftiHeader {
            path: path.to_owned(),
            source,
        })?;
    let dyn_array = obj
        .into_volume()
        .into_ndarray::<T>()
        .map_err(|source| Error::NiftiHeader {
            path: path.to_owned(),
            source,
        })?;
    let ndim = dyn_array.ndim();
    dyn_array
        .into_dimensionality::<Ix3>()
        .map_err(|_| Error::NotAVolume {
            path: path.to_owned(),
            ndim,
        })
}
