//! `dimshrink evaluate`: per-case Dice for the three nested regions plus a
//! mean / standard deviation / median table over the dataset.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use dimshrink_core::nifti_io::load_labels;
use dimshrink_core::{
    aggregate, cases_to_csv, dice_metric, labels_to_nested, CaseMetrics, Error, Modality, Result,
};

use crate::commands::{create_dir, nifti_stem};

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Directory of predicted label volumes, `<id>.nii.gz`
    #[arg(long)]
    pub pred: PathBuf,

    /// Directory of ground-truth labels, `<id>.nii.gz` or `<id>_seg.nii.gz`
    #[arg(long)]
    pub truth: PathBuf,

    /// Directory to write `cases.csv` and `summary.csv` into
    #[arg(long)]
    pub output: Option<PathBuf>,
}

pub fn run(args: &EvaluateArgs) -> Result<()> {
    let preds = index_labels(&args.pred)?;
    let truths = index_labels(&args.truth)?;

    let mut cases = Vec::new();
    let mut unmatched = Vec::new();
    for (id, pred_path) in &preds {
        match truths.get(id) {
            Some(truth_path) => cases.push(score_case(id, pred_path, truth_path)?),
            None => unmatched.push(id.clone()),
        }
    }
    for id in truths.keys() {
        if !preds.contains_key(id) {
            unmatched.push(id.clone());
        }
    }
    unmatched.sort();
    for id in &unmatched {
        eprintln!("unmatched case: {id}");
    }
    if cases.is_empty() {
        return Err(Error::Config("no prediction/truth pairs found".into()));
    }

    let summary = aggregate(&cases)?;
    print!("{}", summary.to_table());
    if let Some(out) = &args.output {
        create_dir(out)?;
        std::fs::write(out.join("cases.csv"), cases_to_csv(&cases))?;
        std::fs::write(out.join("summary.csv"), summary.to_csv())?;
    }
    Ok(())
}

/// Index label files by case id: `<id>.nii.gz` or `<id>_seg.nii.gz`,
/// ignoring modality volumes and the manifest.
fn index_labels(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    if !dir.is_dir() {
        return Err(Error::FileNotFound(dir.to_path_buf()));
    }
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        let Some(stem) = nifti_stem(&name) else {
            continue;
        };
        if Modality::ALL
            .iter()
            .any(|m| stem.ends_with(&format!("_{}", m.suffix())))
        {
            continue;
        }
        let id = stem.strip_suffix("_seg").unwrap_or(stem).to_string();
        // a bare `<id>` file wins over `<id>_seg` so prediction dirs that
        // also hold copied ground truth stay unambiguous
        out.entry(id).or_insert_with(|| entry.path());
    }
    Ok(out)
}

fn score_case(id: &str, pred: &Path, truth: &Path) -> Result<CaseMetrics> {
    let pred = labels_to_nested(&load_labels(pred)?);
    let truth = labels_to_nested(&load_labels(truth)?);
    Ok(CaseMetrics {
        case_id: id.to_string(),
        dice_et: dice_metric(&pred.et, &truth.et)?,
        dice_wt: dice_metric(&pred.wt, &truth.wt)?,
        dice_tc: dice_metric(&pred.tc, &truth.tc)?,
    })
}
