//! `dimshrink predict`: average the sigmoid outputs of one model per
//! checkpoint, threshold into nested regions, map back to BraTS labels and
//! write the result on the case's original grid.

use std::path::PathBuf;

use burn::module::AutodiffModule;
use clap::Args;
use dimshrink_core::nifti_io::{load_volume, save_labels};
use dimshrink_core::{
    ensemble_predict, load_checkpoint, probs_to_labels, restore, uncrop, volume_to_tensor, Error,
    Modality, Result,
};

use crate::manifest::Manifest;
use crate::{device, AutoBack, Back};

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Preprocessed dataset directory (with manifest)
    #[arg(long)]
    pub data: PathBuf,

    /// Case id to predict
    #[arg(long)]
    pub case: String,

    /// Checkpoint file; repeat once per ensemble member
    #[arg(long = "checkpoint", required = true)]
    pub checkpoints: Vec<PathBuf>,

    /// Output NIfTI label file
    #[arg(long)]
    pub output: PathBuf,

    /// Probability threshold for the region masks
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f32,

    /// Skip checkpoints whose modality is missing instead of failing
    #[arg(long)]
    pub allow_partial: bool,
}

pub fn run(args: &PredictArgs) -> Result<()> {
    let device = device();
    let manifest = Manifest::load(&args.data)?;
    let entry = manifest.find(&args.case)?;

    let mut models = Vec::new();
    let mut inputs = Vec::new();
    for path in &args.checkpoints {
        let ckpt = load_checkpoint(path)?;
        let modality = ckpt.config.modality.clone();
        let Some(vol_path) = entry.volume_path(&args.data, &modality) else {
            if args.allow_partial {
                log::warn!(
                    "case {} lacks modality {modality}; skipping {}",
                    entry.id,
                    path.display()
                );
                continue;
            }
            return Err(Error::Config(format!(
                "case {} lacks modality {modality} required by {}",
                entry.id,
                path.display()
            )));
        };
        let volume = load_volume(&vol_path, Modality::from_suffix(&modality))?;
        let (model, _) = restore::<AutoBack>(&ckpt, &device)?;
        models.push(model.valid());
        inputs.push(volume_to_tensor::<Back>(&volume.data, &device));
    }
    if models.is_empty() {
        return Err(Error::Config("no usable checkpoints for this case".into()));
    }

    let probs = ensemble_predict(&models, &inputs)?;
    let (labels, _) = probs_to_labels(probs, args.threshold)?;
    let full = uncrop(&labels, entry.crop_offset, entry.original_dims)?;
    save_labels(&args.output, &full)?;
    println!(
        "wrote {} ({} ensemble member{})",
        args.output.display(),
        models.len(),
        if models.len() == 1 { "" } else { "s" }
    );
    Ok(())
}
