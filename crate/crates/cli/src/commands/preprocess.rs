//! `dimshrink preprocess`: crop raw NIfTI cases to the working grid and
//! z-score normalize them, or generate synthetic phantom datasets. Either
//! way the output directory gets a manifest for later uncropping.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use dimshrink_core::nifti_io::{load_labels, load_volume, save_labels, save_volume};
use dimshrink_core::synthetic::make_phantom_with_noise;
use dimshrink_core::{
    center_crop, center_crop_labels, zscore_normalize, Error, Modality, NormRegion, Result,
};

use crate::commands::{create_dir, nifti_stem, parse_dims};
use crate::manifest::{CaseEntry, Manifest};

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Directory of raw cases (one sub-directory per case, or flat files)
    #[arg(long, required_unless_present = "synthetic", conflicts_with = "synthetic")]
    pub input: Option<PathBuf>,

    /// Output dataset directory; created if missing
    #[arg(long)]
    pub output: PathBuf,

    /// Generate this many synthetic phantom cases instead of reading raw data
    #[arg(long)]
    pub synthetic: Option<usize>,

    /// Working-grid size the volumes are center-cropped to
    #[arg(long, value_parser = parse_dims, default_value = "192x160x108")]
    pub crop: [usize; 3],

    /// Grid size of generated phantoms
    #[arg(long, value_parser = parse_dims, default_value = "32x32x12")]
    pub dims: [usize; 3],

    /// Base seed for phantom generation
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Region the normalization statistics are computed over
    #[arg(long, value_enum, default_value_t = NormArg::Full)]
    pub norm: NormArg,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum NormArg {
    Full,
    Nonzero,
}

impl From<NormArg> for NormRegion {
    fn from(v: NormArg) -> NormRegion {
        match v {
            NormArg::Full => NormRegion::Full,
            NormArg::Nonzero => NormRegion::Nonzero,
        }
    }
}

pub fn run(args: &PreprocessArgs) -> Result<()> {
    create_dir(&args.output)?;
    match args.synthetic {
        Some(n) => run_synthetic(args, n),
        None => run_raw(args, args.input.as_deref().expect("clap enforces input")),
    }
}

fn run_synthetic(args: &PreprocessArgs, count: usize) -> Result<()> {
    if count == 0 {
        return Err(Error::Config("--synthetic needs a positive count".into()));
    }
    let mut manifest = Manifest::default();
    for i in 0..count {
        let id = format!("phantom_{i:03}");
        let geometry_seed = args.seed.wrapping_add(i as u64);
        let mut volumes = BTreeMap::new();
        let mut labels = None;
        for (k, modality) in Modality::ALL.into_iter().enumerate() {
            // same geometry per case, fresh noise per modality
            let noise_seed = geometry_seed ^ ((k as u64 + 1) << 32);
            let phantom = make_phantom_with_noise(geometry_seed, noise_seed, args.dims)?;
            let vol = zscore_normalize(&phantom.volume, args.norm.into())?;
            let file = format!("{id}_{}.nii.gz", modality.suffix());
            save_volume(args.output.join(&file), &vol)?;
            volumes.insert(modality.suffix().to_string(), file);
            labels.get_or_insert(phantom.labels);
        }
        let seg_file = format!("{id}_seg.nii.gz");
        save_labels(args.output.join(&seg_file), &labels.expect("four modalities"))?;
        manifest.cases.push(CaseEntry {
            id,
            original_dims: args.dims,
            crop_offset: [0, 0, 0],
            volumes,
            seg: Some(seg_file),
        });
    }
    manifest.save(&args.output)?;
    println!("generated {count} phantom cases in {}", args.output.display());
    Ok(())
}

fn run_raw(args: &PreprocessArgs, input: &Path) -> Result<()> {
    let cases = discover_cases(input)?;
    if cases.is_empty() {
        return Err(Error::Config(format!(
            "no cases found under {}",
            input.display()
        )));
    }
    let mut manifest = Manifest::default();
    let mut failures: Vec<(String, Error)> = Vec::new();
    for (id, dir) in &cases {
        match process_case(args, id, dir) {
            Ok(entry) => manifest.cases.push(entry),
            Err(err) => failures.push((id.clone(), err)),
        }
    }
    let done = manifest.cases.len();
    if done > 0 {
        manifest.save(&args.output)?;
    }
    println!("processed {done} of {} cases", cases.len());
    for (id, err) in &failures {
        eprintln!("case {id}: {err}");
    }
    if done == 0 {
        return Err(Error::Config("every case failed preprocessing".into()));
    }
    Ok(())
}

/// Case ids with the directory holding their files. Supports both one
/// sub-directory per case and flat `<id>_<modality>.nii.gz` layouts.
fn discover_cases(input: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut out: Vec<(String, PathBuf)> = Vec::new();
    for entry in std::fs::read_dir(input)? {
        let entry = entry?;
        let path = entry.path();
        let name = entry.file_name().to_string_lossy().into_owned();
        if path.is_dir() {
            out.push((name, path));
        } else if let Some(stem) = nifti_stem(&name) {
            for modality in Modality::ALL {
                if let Some(id) = stem.strip_suffix(&format!("_{}", modality.suffix())) {
                    let id = id.to_string();
                    if !out.iter().any(|(existing, _)| *existing == id) {
                        out.push((id, input.to_path_buf()));
                    }
                }
            }
        }
    }
    out.sort();
    Ok(out)
}

fn find_file(dir: &Path, id: &str, suffix: &str) -> Option<PathBuf> {
    for ext in ["nii.gz", "nii"] {
        let path = dir.join(format!("{id}_{suffix}.{ext}"));
        if path.is_file() {
            return Some(path);
        }
    }
    None
}

fn process_case(args: &PreprocessArgs, id: &str, dir: &Path) -> Result<CaseEntry> {
    let result = write_case(args, id, dir);
    if result.is_err() {
        // drop any files written before the failure so a broken case
        // leaves no trace in the output dataset
        for modality in Modality::ALL {
            let _ = std::fs::remove_file(
                args.output.join(format!("{id}_{}.nii.gz", modality.suffix())),
            );
        }
        let _ = std::fs::remove_file(args.output.join(format!("{id}_seg.nii.gz")));
    }
    result
}

fn write_case(args: &PreprocessArgs, id: &str, dir: &Path) -> Result<CaseEntry> {
    let mut inputs = Vec::new();
    for modality in Modality::ALL {
        let path = find_file(dir, id, modality.suffix()).ok_or_else(|| {
            Error::Config(format!("missing modality {} for case {id}", modality.suffix()))
        })?;
        inputs.push((modality, path));
    }
    let mut volumes = BTreeMap::new();
    let mut offset = None;
    let mut original = None;
    for (modality, path) in inputs {
        let raw = load_volume(&path, Some(modality))?;
        let cropped = center_crop(&raw, args.crop)?;
        let normalized = zscore_normalize(&cropped, args.norm.into())?;
        let file = format!("{id}_{}.nii.gz", modality.suffix());
        save_volume(args.output.join(&file), &normalized)?;
        volumes.insert(modality.suffix().to_string(), file);
        offset.get_or_insert(cropped.crop_offset);
        original.get_or_insert(cropped.origin_dims);
    }
    let seg = match find_file(dir, id, "seg") {
        Some(path) => {
            let labels = load_labels(&path)?;
            let cropped = center_crop_labels(&labels, args.crop)?;
            let file = format!("{id}_seg.nii.gz");
            save_labels(args.output.join(&file), &cropped)?;
            Some(file)
        }
        None => None,
    };
    Ok(CaseEntry {
        id: id.to_string(),
        original_dims: original.expect("four modalities processed"),
        crop_offset: offset.expect("four modalities processed"),
        volumes,
        seg,
    })
}
