//! `dimshrink visualize`: tri-planar grayscale views with optional label
//! overlays (enhancing yellow, necrosis red, edema green), plus the three
//! compressed encoder channels when a checkpoint is given.

use std::path::{Path, PathBuf};

use burn::module::AutodiffModule;
use clap::Args;
use dimshrink_core::nifti_io::{load_labels, load_volume};
use dimshrink_core::{load_checkpoint, restore, volume_to_tensor, Error, LabelMap, Result, Volume};
use image::{Rgb, RgbImage};
use ndarray::Array3;

use crate::commands::create_dir;
use crate::{device, AutoBack, Back};

#[derive(Debug, Args)]
pub struct VisualizeArgs {
    /// Scalar volume to render
    #[arg(long)]
    pub volume: PathBuf,

    /// Label volume overlaid on the views
    #[arg(long)]
    pub labels: Option<PathBuf>,

    /// Checkpoint whose encoder output to render as grayscale channels
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,

    /// Directory the PNG files are written into
    #[arg(long)]
    pub output: PathBuf,

    /// Sagittal slice index; out-of-range values fall back to the center
    #[arg(long)]
    pub slice_x: Option<usize>,

    /// Coronal slice index; out-of-range values fall back to the center
    #[arg(long)]
    pub slice_y: Option<usize>,

    /// Axial slice index; out-of-range values fall back to the center
    #[arg(long)]
    pub slice_z: Option<usize>,
}

pub fn run(args: &VisualizeArgs) -> Result<()> {
    create_dir(&args.output)?;
    let volume = load_volume(&args.volume, None)?;
    let labels = match &args.labels {
        Some(path) => {
            let labels = load_labels(path)?;
            if labels.dims() != volume.dims() {
                return Err(Error::ShapeMismatch {
                    context: "visualize labels",
                    expected: volume.dims().to_vec(),
                    actual: labels.dims().to_vec(),
                });
            }
            Some(labels)
        }
        None => None,
    };

    let dims = volume.dims();
    let planes = [
        ("sagittal", 0, pick_slice(args.slice_x, dims[0])),
        ("coronal", 1, pick_slice(args.slice_y, dims[1])),
        ("axial", 2, pick_slice(args.slice_z, dims[2])),
    ];
    for (name, axis, index) in planes {
        let image = render_plane(&volume, labels.as_ref(), axis, index);
        write_png(&args.output.join(format!("{name}.png")), image)?;
    }

    if let Some(path) = &args.checkpoint {
        render_encoder_channels(path, &volume, &args.output)?;
    }
    println!("wrote images to {}", args.output.display());
    Ok(())
}

fn pick_slice(requested: Option<usize>, len: usize) -> usize {
    match requested {
        Some(i) if i < len => i,
        Some(i) => {
            log::warn!("slice {i} out of range (0..{len}); using center slice");
            len / 2
        }
        None => len / 2,
    }
}

fn intensity_range(data: &Array3<f32>) -> (f32, f32) {
    let min = data.iter().copied().fold(f32::INFINITY, f32::min);
    let max = data.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    (min, max)
}

fn to_gray(value: f32, min: f32, max: f32) -> u8 {
    if max > min {
        ((value - min) / (max - min) * 255.0).round() as u8
    } else {
        0
    }
}

/// Figure-2 color scheme: enhancing tumor yellow, necrosis/non-enhancing
/// core red, edema green.
fn label_color(label: u8) -> Option<Rgb<u8>> {
    match label {
        1 => Some(Rgb([220, 40, 40])),
        2 => Some(Rgb([40, 200, 40])),
        4 => Some(Rgb([230, 230, 40])),
        _ => None,
    }
}

fn plane_shape(dims: [usize; 3], axis: usize) -> (usize, usize) {
    match axis {
        0 => (dims[1], dims[2]),
        1 => (dims[0], dims[2]),
        _ => (dims[0], dims[1]),
    }
}

fn voxel_index(axis: usize, index: usize, u: usize, v: usize) -> [usize; 3] {
    match axis {
        0 => [index, u, v],
        1 => [u, index, v],
        _ => [u, v, index],
    }
}

fn render_plane(
    volume: &Volume,
    labels: Option<&LabelMap>,
    axis: usize,
    index: usize,
) -> RgbImage {
    let dims = volume.dims();
    let (width, height) = plane_shape(dims, axis);
    let (min, max) = intensity_range(&volume.data);
    let mut image = RgbImage::new(width as u32, height as u32);
    for (u, v, pixel) in image.enumerate_pixels_mut() {
        let idx = voxel_index(axis, index, u as usize, v as usize);
        let gray = to_gray(volume.data[idx], min, max);
        *pixel = Rgb([gray, gray, gray]);
        if let Some(labels) = labels {
            if let Some(color) = label_color(labels.data[idx]) {
                *pixel = blend(gray, color);
            }
        }
    }
    image
}

fn blend(gray: u8, color: Rgb<u8>) -> Rgb<u8> {
    let mix = |c: u8| ((0.55 * c as f32) + (0.45 * gray as f32)).round() as u8;
    Rgb([mix(color[0]), mix(color[1]), mix(color[2])])
}

/// Run just the shrink encoder and write its three compressed channels as
/// per-channel min-max scaled grayscale images.
fn render_encoder_channels(checkpoint: &Path, volume: &Volume, output: &Path) -> Result<()> {
    let device = device();
    let ckpt = load_checkpoint(checkpoint)?;
    let (model, _) = restore::<AutoBack>(&ckpt, &device)?;
    let model = model.valid();
    let input = volume_to_tensor::<Back>(&volume.data, &device);
    let (image, _) = model.encoder.forward(input)?;
    let [_, channels, width, height] = image.dims();
    let flat: Vec<f32> = image
        .into_data()
        .to_vec()
        .map_err(|e| Error::Config(format!("tensor readback failed: {e:?}")))?;
    for c in 0..channels {
        let slice = &flat[c * width * height..(c + 1) * width * height];
        let min = slice.iter().copied().fold(f32::INFINITY, f32::min);
        let max = slice.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        let mut img = RgbImage::new(width as u32, height as u32);
        for (x, y, pixel) in img.enumerate_pixels_mut() {
            let gray = to_gray(slice[x as usize * height + y as usize], min, max);
            *pixel = Rgb([gray, gray, gray]);
        }
        write_png(&output.join(format!("channel_{c}.png")), img)?;
    }
    Ok(())
}

fn write_png(path: &Path, image: RgbImage) -> Result<()> {
    image
        .save(path)
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
}
