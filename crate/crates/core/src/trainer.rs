//! The training loop: Adam at a fixed starting rate, reduce-on-plateau
//! scheduling, per-epoch logging, checkpoints and model ensembling.

use std::path::Path;

use burn::module::{AutodiffModule, Module};
use burn::optim::adaptor::OptimizerAdaptor;
use burn::optim::{Adam, AdamConfig, GradientsParams, Optimizer};
use burn::record::{BinBytesRecorder, FullPrecisionSettings, Recorder};
use burn::tensor::backend::{AutodiffBackend, Backend};
use burn::tensor::{Tensor, TensorData};
use ndarray::Array3;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::combined_loss;
use crate::metrics::dice_metric;
use crate::model::{build_net, probs_to_labels, DimShrinkNet, NetConfig};
use crate::volume::NestedMask;

/// Everything that defines a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub net: NetConfig,
    /// Which input volume this model consumes; recorded so an ensemble can
    /// route each modality to its model.
    pub modality: String,
    pub seed: u64,
    /// Initial learning rate.
    pub learning_rate: f64,
    /// Multiplier applied to the learning rate on a plateau.
    pub plateau_factor: f64,
    /// Number of epochs without improvement before a reduction.
    pub plateau_patience: usize,
    /// Hard cap on epochs.
    pub max_epochs: usize,
    /// Stop after this many learning-rate reductions.
    pub max_reductions: usize,
    pub adam_epsilon: f32,
    pub dice_epsilon: f64,
    pub freeze_backbone: bool,
    /// Hard Dice threshold used for the per-epoch training metrics.
    pub metric_threshold: f32,
}

impl TrainConfig {
    /// The published recipe: Adam at 1e-4, reduce by 10x after 50 stagnant
    /// epochs, batch size 1.
    pub fn paper_default() -> TrainConfig {
        TrainConfig {
            net: NetConfig::paper_default(),
            modality: "t1ce".into(),
            seed: 0,
            learning_rate: 1e-4,
            plateau_factor: 0.1,
            plateau_patience: 50,
            max_epochs: 300,
            max_reductions: 2,
            adam_epsilon: 1e-8,
            dice_epsilon: crate::loss::DICE_EPSILON,
            freeze_backbone: false,
            metric_threshold: 0.5,
        }
    }

    /// Desk-scale run used in tests.
    pub fn toy_default() -> TrainConfig {
        TrainConfig {
            net: NetConfig::toy_default(),
            max_epochs: 20,
            plateau_patience: 8,
            ..TrainConfig::paper_default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.net.validate()?;
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if !(0.0 < self.plateau_factor && self.plateau_factor < 1.0) {
            return Err(Error::Config("plateau factor must be in (0, 1)".into()));
        }
        if self.plateau_patience == 0 || self.max_epochs == 0 {
            return Err(Error::Config(
                "plateau patience and max epochs must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Reduce-on-plateau state machine, observed once per epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateauSchedule {
    lr: f64,
    factor: f64,
    patience: usize,
    best: f64,
    stagnant: usize,
    reductions: usize,
}

impl PlateauSchedule {
    pub fn new(lr: f64, factor: f64, patience: usize) -> Self {
        Self {
            lr,
            factor,
            patience,
            best: f64::INFINITY,
            stagnant: 0,
            reductions: 0,
        }
    }

    /// Feed one epoch's loss; returns the learning rate for the next epoch.
    pub fn observe(&mut self, loss: f64) -> f64 {
        if loss < self.best {
            self.best = loss;
            self.stagnant = 0;
        } else {
            self.stagnant += 1;
            if self.stagnant >= self.patience {
                self.lr *= self.factor;
                self.stagnant = 0;
                self.reductions += 1;
            }
        }
        self.lr
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn reductions(&self) -> usize {
        self.reductions
    }
}

/// One training example: a normalized volume and its region masks.
#[derive(Debug, Clone)]
pub struct TrainCase {
    pub id: String,
    pub volume: Array3<f32>,
    pub mask: NestedMask,
}

/// `W x H x D` array as a `[1, 1, W, H, D]` tensor.
pub fn volume_to_tensor<B: Backend>(vol: &Array3<f32>, device: &B::Device) -> Tensor<B, 5> {
    let (w, h, d) = vol.dim();
    let data: Vec<f32> = vol.iter().copied().collect();
    Tensor::from_data(TensorData::new(data, [1, 1, w, h, d]), device)
}

/// Region masks as a `[1, 3, W, H, D]` float tensor in WT, TC, ET order.
pub fn mask_to_tensor<B: Backend>(mask: &NestedMask, device: &B::Device) -> Tensor<B, 5> {
    let (w, h, d) = mask.wt.dim();
    let mut data = Vec::with_capacity(3 * w * h * d);
    for region in [&mask.wt, &mask.tc, &mask.et] {
        data.extend(region.iter().map(|&v| f32::from(v)));
    }
    Tensor::from_data(TensorData::new(data, [1, 3, w, h, d]), device)
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub loss_total: f64,
    pub loss_ce: f64,
    pub dice_wt: f64,
    pub dice_tc: f64,
    pub dice_et: f64,
}

/// Training-log CSV, one row per epoch.
pub fn history_csv(history: &[EpochLog]) -> String {
    let mut out = String::from("epoch,lr,loss_total,loss_ce,dice_wt,dice_tc,dice_et\n");
    for row in history {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.epoch, row.lr, row.loss_total, row.loss_ce, row.dice_wt, row.dice_tc, row.dice_et
        ));
    }
    out
}

/// The optimizer type used for the full network.
pub type NetOptimizer<B> = OptimizerAdaptor<Adam, DimShrinkNet<B>, B>;

/// Result of a training run.
pub struct TrainOutcome<B: AutodiffBackend> {
    pub model: DimShrinkNet<B>,
    pub optimizer: NetOptimizer<B>,
    pub schedule: PlateauSchedule,
    pub history: Vec<EpochLog>,
    pub epochs_run: usize,
}

fn init_optimizer<B: AutodiffBackend>(cfg: &TrainConfig) -> NetOptimizer<B> {
    AdamConfig::new().with_epsilon(cfg.adam_epsilon).init()
}

/// Train a fresh model on the given cases.
pub fn train<B: AutodiffBackend>(
    cfg: &TrainConfig,
    cases: &[TrainCase],
    device: &B::Device,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome<B>> {
    cfg.validate()?;
    if cases.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut model = build_net::<B>(&cfg.net, cfg.seed, device)?;
    if cfg.freeze_backbone {
        model = model.freeze_backbone();
    }
    let optimizer = init_optimizer::<B>(cfg);
    let schedule = PlateauSchedule::new(cfg.learning_rate, cfg.plateau_factor, cfg.plateau_patience);
    run_epochs(cfg, cases, device, model, optimizer, schedule, 0, &mut on_epoch)
}

/// Continue a run restored from a checkpoint.
pub fn train_resumed<B: AutodiffBackend>(
    cfg: &TrainConfig,
    cases: &[TrainCase],
    device: &B::Device,
    model: DimShrinkNet<B>,
    optimizer: NetOptimizer<B>,
    schedule: PlateauSchedule,
    start_epoch: usize,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome<B>> {
    cfg.validate()?;
    if cases.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let model = if cfg.freeze_backbone {
        model.freeze_backbone()
    } else {
        model
    };
    run_epochs(cfg, cases, device, model, optimizer, schedule, start_epoch, &mut on_epoch)
}

#[allow(clippy::too_many_arguments)]
fn run_epochs<B: AutodiffBackend>(
    cfg: &TrainConfig,
    cases: &[TrainCase],
    device: &B::Device,
    mut model: DimShrinkNet<B>,
    mut optimizer: NetOptimizer<B>,
    mut schedule: PlateauSchedule,
    start_epoch: usize,
    on_epoch: &mut impl FnMut(&EpochLog),
) -> Result<TrainOutcome<B>> {
    let mut history = Vec::new();
    // shuffling is part of the run's determinism: derive the order from the
    // seed and epoch number so resumed runs see the same permutations
    let mut epochs_run = start_epoch;
    for epoch in (start_epoch + 1)..=cfg.max_epochs {
        let mut order: Vec<usize> = (0..cases.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (epoch as u64).wrapping_mul(0x9E37));
        order.shuffle(&mut rng);

        let lr = schedule.lr();
        let mut sum_total = 0.0;
        let mut sum_ce = 0.0;
        let mut sum_dice = [0.0f64; 3];
        for &idx in &order {
            let case = &cases[idx];
            let input = volume_to_tensor::<B>(&case.volume, device);
            let target = mask_to_tensor::<B>(&case.mask, device);
            let probs = model.forward(input)?;
            let (loss, value) = combined_loss(probs.clone(), target, cfg.dice_epsilon)?;
            if !value.total.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    case: case.id.clone(),
                });
            }
            let grads = GradientsParams::from_grads(loss.backward(), &model);
            model = optimizer.step(lr, model, grads);
            sum_total += value.total;
            sum_ce += value.bce;

            let (_, pred_mask) = probs_to_labels(probs.inner(), cfg.metric_threshold)?;
            sum_dice[0] += dice_metric(&pred_mask.wt, &case.mask.wt)?;
            sum_dice[1] += dice_metric(&pred_mask.tc, &case.mask.tc)?;
            sum_dice[2] += dice_metric(&pred_mask.et, &case.mask.et)?;
        }
        let n = cases.len() as f64;
        let log = EpochLog {
            epoch,
            lr,
            loss_total: sum_total / n,
            loss_ce: sum_ce / n,
            dice_wt: sum_dice[0] / n,
            dice_tc: sum_dice[1] / n,
            dice_et: sum_dice[2] / n,
        };
        on_epoch(&log);
        history.push(log);
        epochs_run = epoch;

        schedule.observe(sum_total / n);
        if schedule.reductions() >= cfg.max_reductions {
            log::info!("stopping after {} learning-rate reductions", cfg.max_reductions);
            break;
        }
    }
    Ok(TrainOutcome {
        model,
        optimizer,
        schedule,
        history,
        epochs_run,
    })
}

/// On-disk training state: config, progress and serialized records.
#[derive(Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: TrainConfig,
    pub epoch: usize,
    pub schedule: PlateauSchedule,
    pub model: Vec<u8>,
    pub optimizer: Vec<u8>,
}

pub const CHECKPOINT_VERSION: u32 = 1;

/// Serialize the full training state.
pub fn make_checkpoint<B: AutodiffBackend>(
    cfg: &TrainConfig,
    outcome: &TrainOutcome<B>,
) -> Result<Checkpoint>
where
    DimShrinkNet<B>: Clone,
{
    let recorder = BinBytesRecorder::<FullPrecisionSettings>::default();
    let model = recorder
        .record(outcome.model.clone().into_record(), ())
        .map_err(|e| Error::Checkpoint(format!("model record: {e}")))?;
    let optimizer = recorder
        .record(outcome.optimizer.to_record(), ())
        .map_err(|e| Error::Checkpoint(format!("optimizer record: {e}")))?;
    Ok(Checkpoint {
        version: CHECKPOINT_VERSION,
        config: cfg.clone(),
        epoch: outcome.epochs_run,
        schedule: outcome.schedule.clone(),
        model,
        optimizer,
    })
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    let bytes =
        rmp_serde::to_vec(ckpt).map_err(|e| Error::Checkpoint(format!("encode: {e}")))?;
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    if !path.is_file() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let bytes = std::fs::read(path)?;
    let ckpt: Checkpoint =
        rmp_serde::from_slice(&bytes).map_err(|e| Error::Checkpoint(format!("decode: {e}")))?;
    if ckpt.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {}",
            ckpt.version
        )));
    }
    Ok(ckpt)
}

/// Rebuild model and optimizer from a checkpoint.
pub fn restore<B: AutodiffBackend>(
    ckpt: &Checkpoint,
    device: &B::Device,
) -> Result<(DimShrinkNet<B>, NetOptimizer<B>)> {
    let recorder = BinBytesRecorder::<FullPrecisionSettings>::default();
    let model = build_net::<B>(&ckpt.config.net, ckpt.config.seed, device)?;
    let record = recorder
        .load(ckpt.model.clone(), device)
        .map_err(|e| Error::Checkpoint(format!("model load: {e}")))?;
    let model = model.load_record(record);
    let optimizer = init_optimizer::<B>(&ckpt.config);
    let record = recorder
        .load(ckpt.optimizer.clone(), device)
        .map_err(|e| Error::Checkpoint(format!("optimizer load: {e}")))?;
    let optimizer = optimizer.load_record(record);
    Ok((model, optimizer))
}

/// Average the probability outputs of several models; the standard use is
/// one model per input modality.
pub fn ensemble_predict<B: Backend>(
    models: &[DimShrinkNet<B>],
    inputs: &[Tensor<B, 5>],
) -> Result<Tensor<B, 5>> {
    if models.is_empty() || models.len() != inputs.len() {
        return Err(Error::Config(format!(
            "ensemble needs one input per model, got {} models and {} inputs",
            models.len(),
            inputs.len()
        )));
    }
    let mut acc: Option<Tensor<B, 5>> = None;
    for (model, input) in models.iter().zip(inputs) {
        let probs = model.forward(input.clone())?;
        acc = Some(match acc {
            Some(sum) => sum + probs,
            None => probs,
        });
    }
    Ok(acc.expect("non-empty ensemble").div_scalar(models.len() as f64))
}

/// Run one model on one volume and return the probabilities on the
/// non-autodiff backend.
pub fn predict<B: AutodiffBackend>(
    model: &DimShrinkNet<B>,
    volume: &Array3<f32>,
    device: &B::Device,
) -> Result<Tensor<B::InnerBackend, 5>> {
    let input = volume_to_tensor::<B>(volume, device);
    Ok(model.valid().forward(input.inner())?)
}
