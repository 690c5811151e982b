//! `dimshrink train`: fit one model to one modality of a preprocessed
//! dataset and write a resumable checkpoint plus a CSV training log.

use std::path::{Path, PathBuf};

use clap::Args;
use dimshrink_core::nifti_io::{load_labels, load_volume};
use dimshrink_core::{
    history_csv, labels_to_nested, load_checkpoint, make_checkpoint, restore, save_checkpoint,
    train, train_resumed, Error, Modality, Result, TrainCase, TrainConfig, TrainOutcome,
};

use crate::manifest::Manifest;
use crate::{device, AutoBack};

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Preprocessed dataset directory (with manifest)
    #[arg(long)]
    pub data: PathBuf,

    /// TOML training configuration; defaults to the chosen preset
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Built-in configuration used when no --config is given
    #[arg(long, value_enum, default_value_t = Preset::Paper)]
    pub preset: Preset,

    /// Override the modality this model trains on
    #[arg(long)]
    pub modality: Option<String>,

    /// Override the initialization and shuffling seed
    #[arg(long)]
    pub seed: Option<u64>,

    /// Override the epoch cap
    #[arg(long)]
    pub epochs: Option<usize>,

    /// Override the initial learning rate
    #[arg(long)]
    pub learning_rate: Option<f64>,

    /// Checkpoint path to write (and resume from)
    #[arg(long)]
    pub output: PathBuf,

    /// Training-log CSV path; defaults to the checkpoint path + `_log.csv`
    #[arg(long)]
    pub log: Option<PathBuf>,

    /// Continue from an existing checkpoint at --output
    #[arg(long)]
    pub resume: bool,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum Preset {
    /// Full-size network and published recipe
    Paper,
    /// Small network for smoke tests
    Toy,
}

pub fn run(args: &TrainArgs) -> Result<()> {
    let device = device();
    let resume_from = if args.resume {
        Some(load_checkpoint(&args.output)?)
    } else {
        None
    };
    let mut cfg = match (&resume_from, &args.config) {
        (Some(ckpt), _) => ckpt.config.clone(),
        (None, Some(path)) => load_config(path)?,
        (None, None) => match args.preset {
            Preset::Paper => TrainConfig::paper_default(),
            Preset::Toy => TrainConfig::toy_default(),
        },
    };
    apply_overrides(&mut cfg, args)?;
    cfg.validate()?;

    let cases = load_cases(&args.data, &cfg.modality)?;
    println!(
        "training on {} cases ({} modality), up to {} epochs",
        cases.len(),
        cfg.modality,
        cfg.max_epochs
    );
    let on_epoch = |log: &dimshrink_core::EpochLog| {
        println!(
            "epoch {:>4}  lr {:.2e}  loss {:+.4}  dice wt/tc/et {:.3}/{:.3}/{:.3}",
            log.epoch, log.lr, log.loss_total, log.dice_wt, log.dice_tc, log.dice_et
        );
    };
    let outcome: TrainOutcome<AutoBack> = match resume_from {
        Some(ckpt) => {
            let (model, optimizer) = restore::<AutoBack>(&ckpt, &device)?;
            train_resumed(
                &cfg, &cases, &device, model, optimizer, ckpt.schedule, ckpt.epoch, on_epoch,
            )?
        }
        None => train(&cfg, &cases, &device, on_epoch)?,
    };

    let ckpt = make_checkpoint(&cfg, &outcome)?;
    save_checkpoint(&ckpt, &args.output)?;
    let log_path = args
        .log
        .clone()
        .unwrap_or_else(|| default_log_path(&args.output));
    write_log(&log_path, &outcome, args.resume)?;
    println!(
        "saved checkpoint (epoch {}) to {}",
        outcome.epochs_run,
        args.output.display()
    );
    Ok(())
}

fn load_config(path: &Path) -> Result<TrainConfig> {
    if !path.is_file() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("config {}: {e}", path.display())))
}

fn apply_overrides(cfg: &mut TrainConfig, args: &TrainArgs) -> Result<()> {
    if let Some(modality) = &args.modality {
        if Modality::from_suffix(modality).is_none() {
            return Err(Error::Config(format!("unknown modality {modality:?}")));
        }
        cfg.modality = modality.clone();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(epochs) = args.epochs {
        cfg.max_epochs = epochs;
    }
    if let Some(lr) = args.learning_rate {
        cfg.learning_rate = lr;
    }
    Ok(())
}

fn load_cases(data: &Path, modality: &str) -> Result<Vec<TrainCase>> {
    let manifest = Manifest::load(data)?;
    let mut cases = Vec::new();
    for entry in &manifest.cases {
        let Some(seg) = &entry.seg else {
            log::info!("case {} has no segmentation; skipped", entry.id);
            continue;
        };
        let vol_path = entry.volume_path(data, modality).ok_or_else(|| {
            Error::Config(format!("case {} lacks modality {modality}", entry.id))
        })?;
        let volume = load_volume(&vol_path, Modality::from_suffix(modality))?;
        let labels = load_labels(data.join(seg))?;
        cases.push(TrainCase {
            id: entry.id.clone(),
            volume: volume.data,
            mask: labels_to_nested(&labels),
        });
    }
    Ok(cases)
}

fn default_log_path(checkpoint: &Path) -> PathBuf {
    let stem = checkpoint
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "train".into());
    checkpoint.with_file_name(format!("{stem}_log.csv"))
}

/// Write the training log; a resumed run appends its rows to an existing
/// file so the CSV covers the whole history.
fn write_log(path: &Path, outcome: &TrainOutcome<AutoBack>, resume: bool) -> Result<()> {
    let csv = history_csv(&outcome.history);
    if resume && path.is_file() {
        let rows = csv.split_once('\n').map(|(_, r)| r).unwrap_or("");
        let mut existing = std::fs::read_to_string(path)?;
        existing.push_str(rows);
        std::fs::write(path, existing)?;
    } else {
        std::fs::write(path, csv)?;
    }
    Ok(())
}
