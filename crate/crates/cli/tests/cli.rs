//! End-to-end tests driving the `dimshrink` binary.

use std::path::Path;
use std::process::{Command, Output};

use dimshrink_core::nifti_io::{load_labels, save_volume};
use dimshrink_core::{TrainConfig, Volume};
use ndarray::Array3;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn dimshrink(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dimshrink"));
    for arg in args {
        cmd.arg(arg.as_ref());
    }
    cmd.output().expect("binary runs")
}

fn assert_success(out: &Output, context: &str) {
    assert!(
        out.status.success(),
        "{context} failed:\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn csv_rows(path: &Path) -> usize {
    std::fs::read_to_string(path)
        .expect("log exists")
        .lines()
        .count()
        .saturating_sub(1)
}

#[test]
fn pipeline_preprocess_train_predict_evaluate_visualize() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let ckpt = dir.path().join("model.ckpt");
    let log = dir.path().join("model_log.csv");

    let out = dimshrink(&[
        &"preprocess", &"--synthetic", &"2", &"--dims", &"16x16x12", &"--seed", &"1",
        &"--output", &data,
    ]);
    assert_success(&out, "preprocess --synthetic");
    assert!(data.join("manifest.json").is_file());
    for case in ["phantom_000", "phantom_001"] {
        for suffix in ["t1", "t1ce", "t2", "flair", "seg"] {
            assert!(
                data.join(format!("{case}_{suffix}.nii.gz")).is_file(),
                "missing {case}_{suffix}"
            );
        }
    }

    let out = dimshrink(&[
        &"train", &"--data", &data, &"--preset", &"toy", &"--modality", &"t1", &"--seed",
        &"3", &"--epochs", &"2", &"--output", &ckpt,
    ]);
    assert_success(&out, "train");
    assert!(ckpt.is_file());
    assert_eq!(csv_rows(&log), 2, "two epochs logged");

    // resuming continues the epoch counter and appends to the log
    let out = dimshrink(&[
        &"train", &"--data", &data, &"--resume", &"--epochs", &"4", &"--output", &ckpt,
    ]);
    assert_success(&out, "train --resume");
    assert_eq!(csv_rows(&log), 4, "resumed run appended epochs 3 and 4");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("epoch    3"), "stdout: {stdout}");

    let pred_dir = dir.path().join("pred");
    std::fs::create_dir_all(&pred_dir).unwrap();
    let pred_file = pred_dir.join("phantom_000.nii.gz");
    let out = dimshrink(&[
        &"predict", &"--data", &data, &"--case", &"phantom_000", &"--checkpoint", &ckpt,
        &"--output", &pred_file,
    ]);
    assert_success(&out, "predict");
    let labels = load_labels(&pred_file).expect("prediction is a valid label volume");
    assert_eq!(labels.dims(), [16, 16, 12], "prediction is on the original grid");

    let report = dir.path().join("report");
    let out = dimshrink(&[
        &"evaluate", &"--pred", &pred_dir, &"--truth", &data, &"--output", &report,
    ]);
    assert_success(&out, "evaluate");
    assert!(String::from_utf8_lossy(&out.stdout).contains("Median"));
    assert!(report.join("cases.csv").is_file());
    assert!(report.join("summary.csv").is_file());
    let unmatched = String::from_utf8_lossy(&out.stderr);
    assert!(
        unmatched.contains("phantom_001"),
        "the case without a prediction is listed: {unmatched}"
    );

    let viz = dir.path().join("viz");
    let out = dimshrink(&[
        &"visualize", &"--volume", &data.join("phantom_000_t1.nii.gz"), &"--labels",
        &data.join("phantom_000_seg.nii.gz"), &"--checkpoint", &ckpt, &"--output", &viz,
    ]);
    assert_success(&out, "visualize");
    for file in [
        "axial.png", "coronal.png", "sagittal.png", "channel_0.png", "channel_1.png",
        "channel_2.png",
    ] {
        assert!(viz.join(file).is_file(), "missing {file}");
    }
}

#[test]
fn preprocess_raw_cases_crop_and_continue_past_broken_ones() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw");
    let out_dir = dir.path().join("out");
    let mut rng = ChaCha8Rng::seed_from_u64(5);

    // two raw cases on a 20x18x14 grid; case_bad lacks its t2 volume
    for (id, broken) in [("case_good", false), ("case_bad", true)] {
        let case_dir = raw.join(id);
        std::fs::create_dir_all(&case_dir).unwrap();
        for suffix in ["t1", "t1ce", "t2", "flair"] {
            if broken && suffix == "t2" {
                continue;
            }
            let data = Array3::from_shape_fn((20, 18, 14), |_| rng.random_range(0.0..100.0f32));
            save_volume(
                case_dir.join(format!("{id}_{suffix}.nii.gz")),
                &Volume::new(data, None),
            )
            .unwrap();
        }
        let seg = Array3::from_shape_fn((20, 18, 14), |(x, y, _)| {
            if x < 4 && y < 4 {
                4u8
            } else {
                0
            }
        });
        save_volume(
            case_dir.join(format!("{id}_seg.nii.gz")),
            &Volume::new(seg.mapv(f32::from), None),
        )
        .unwrap();
    }

    let out = dimshrink(&[
        &"preprocess", &"--input", &raw, &"--output", &out_dir, &"--crop", &"16x16x12",
    ]);
    assert_success(&out, "preprocess raw");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("case_bad"), "broken case reported: {stderr}");
    assert!(out_dir.join("case_good_t2.nii.gz").is_file());
    assert!(!out_dir.join("case_bad_t1.nii.gz").is_file());

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap())
            .unwrap();
    let cases = manifest["cases"].as_array().unwrap();
    assert_eq!(cases.len(), 1);
    assert_eq!(cases[0]["id"], "case_good");
    assert_eq!(cases[0]["original_dims"], serde_json::json!([20, 18, 14]));
    assert_eq!(cases[0]["crop_offset"], serde_json::json!([2, 1, 1]));
}

#[test]
fn train_rejects_unknown_config_key() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = dimshrink(&[
        &"preprocess", &"--synthetic", &"1", &"--dims", &"16x16x12", &"--output", &data,
    ]);
    assert_success(&out, "preprocess");

    let mut config = toml::to_string(&TrainConfig::toy_default()).unwrap();
    config.push_str("\nlerning_rate = 0.1\n");
    let config_path = dir.path().join("train.toml");
    std::fs::write(&config_path, config).unwrap();

    let out = dimshrink(&[
        &"train", &"--data", &data, &"--config", &config_path, &"--output",
        &dir.path().join("model.ckpt"),
    ]);
    assert!(!out.status.success(), "bad config key must fail");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("lerning_rate"), "offending key named: {stderr}");
}

#[test]
fn evaluate_perfect_predictions_score_one() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = dimshrink(&[
        &"preprocess", &"--synthetic", &"2", &"--dims", &"16x16x12", &"--output", &data,
    ]);
    assert_success(&out, "preprocess");

    // predictions are copies of the ground truth
    let pred = dir.path().join("pred");
    std::fs::create_dir_all(&pred).unwrap();
    for case in ["phantom_000", "phantom_001"] {
        std::fs::copy(
            data.join(format!("{case}_seg.nii.gz")),
            pred.join(format!("{case}.nii.gz")),
        )
        .unwrap();
    }
    let report = dir.path().join("report");
    let out = dimshrink(&[
        &"evaluate", &"--pred", &pred, &"--truth", &data, &"--output", &report,
    ]);
    assert_success(&out, "evaluate");
    let summary = std::fs::read_to_string(report.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().nth(1), Some("mean,1,1,1"));
    assert_eq!(summary.lines().nth(3), Some("median,1,1,1"));
}

#[test]
fn predict_routes_modalities_and_respects_allow_partial() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = dimshrink(&[
        &"preprocess", &"--synthetic", &"1", &"--dims", &"16x16x12", &"--output", &data,
    ]);
    assert_success(&out, "preprocess");

    let ckpt_t1 = dir.path().join("t1.ckpt");
    let ckpt_t2 = dir.path().join("t2.ckpt");
    for (modality, ckpt) in [("t1", &ckpt_t1), ("t2", &ckpt_t2)] {
        let out = dimshrink(&[
            &"train", &"--data", &data, &"--preset", &"toy", &"--modality", &modality,
            &"--epochs", &"1", &"--output", ckpt,
        ]);
        assert_success(&out, "train");
    }

    // drop the t2 volume from the manifest so its checkpoint has no input
    let manifest_path = data.join("manifest.json");
    let mut manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&manifest_path).unwrap()).unwrap();
    manifest["cases"][0]["volumes"]
        .as_object_mut()
        .unwrap()
        .remove("t2");
    std::fs::write(&manifest_path, manifest.to_string()).unwrap();

    let pred = dir.path().join("pred.nii.gz");
    let strict = dimshrink(&[
        &"predict", &"--data", &data, &"--case", &"phantom_000", &"--checkpoint", &ckpt_t1,
        &"--checkpoint", &ckpt_t2, &"--output", &pred,
    ]);
    assert!(!strict.status.success(), "missing modality must fail without --allow-partial");

    let partial = dimshrink(&[
        &"predict", &"--data", &data, &"--case", &"phantom_000", &"--checkpoint", &ckpt_t1,
        &"--checkpoint", &ckpt_t2, &"--allow-partial", &"--output", &pred,
    ]);
    assert_success(&partial, "predict --allow-partial");
    let labels = load_labels(&pred).unwrap();
    assert!(labels.data.iter().all(|v| matches!(v, 0 | 1 | 2 | 4)));
}
