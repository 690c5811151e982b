//! Training losses: channel-averaged soft Dice, binary cross entropy over
//! the three region channels, and their combination `L = L_Cross - L_Dice`.

use burn::tensor::backend::Backend;
use burn::tensor::{ElementConversion, Tensor};

use crate::error::{Error, Result};

/// Stabilizer added to the soft Dice denominator.
pub const DICE_EPSILON: f64 = 1e-5;

/// Clamp bound keeping the cross entropy logarithms finite.
const BCE_CLAMP: f64 = 1e-7;

/// Scalar readout of one loss evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue {
    pub total: f64,
    pub bce: f64,
    pub dice: f64,
}

fn check_pair<B: Backend>(pred: &Tensor<B, 5>, target: &Tensor<B, 5>) -> Result<()> {
    if pred.dims() != target.dims() {
        return Err(Error::ShapeMismatch {
            context: "loss input",
            expected: target.dims().to_vec(),
            actual: pred.dims().to_vec(),
        });
    }
    Ok(())
}

/// Soft Dice per channel: `2 Σ pt·pp / (Σ pt² + Σ pp² + ε)`, then averaged
/// over the channels. Returns a scalar tensor (shape `[1]`).
///
/// With an all-zero prediction and target the score is 0, not 1: the
/// stabilized quotient vanishes. The hard evaluation metric handles that
/// case separately; the loss only ever sees it transiently.
pub fn soft_dice<B: Backend>(
    pred: Tensor<B, 5>,
    target: Tensor<B, 5>,
    epsilon: f64,
) -> Result<Tensor<B, 1>> {
    check_pair(&pred, &target)?;
    let [n, c, w, h, d] = pred.dims();
    let len = n * w * h * d;
    let p = pred.swap_dims(0, 1).reshape([c, len]);
    let t = target.swap_dims(0, 1).reshape([c, len]);
    let inter = (p.clone() * t.clone()).sum_dim(1);
    let denom = p.powi_scalar(2).sum_dim(1) + t.powi_scalar(2).sum_dim(1) + epsilon;
    let per_channel = inter.mul_scalar(2.0) / denom;
    Ok(per_channel.reshape([c]).mean())
}

/// Binary cross entropy averaged over all channels and voxels, with the
/// probabilities clamped away from 0 and 1.
pub fn bce_loss<B: Backend>(pred: Tensor<B, 5>, target: Tensor<B, 5>) -> Result<Tensor<B, 1>> {
    check_pair(&pred, &target)?;
    let p = pred.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
    let pos = target.clone() * p.clone().log();
    let neg = (target.neg() + 1.0) * (p.neg() + 1.0).log();
    Ok((pos + neg).mean().neg())
}

/// The combined objective `L = L_Cross - L_Dice`; minimizing it maximizes
/// the soft Dice. Returns the scalar graph node plus a plain-number readout.
pub fn combined_loss<B: Backend>(
    pred: Tensor<B, 5>,
    target: Tensor<B, 5>,
    epsilon: f64,
) -> Result<(Tensor<B, 1>, LossValue)> {
    let dice = soft_dice(pred.clone(), target.clone(), epsilon)?;
    let bce = bce_loss(pred, target)?;
    let total = bce.clone() - dice.clone();
    let value = LossValue {
        total: total.clone().into_scalar().elem(),
        bce: bce.into_scalar().elem(),
        dice: dice.into_scalar().elem(),
    };
    Ok((total, value))
}
