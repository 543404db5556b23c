//! Losses for the toy denoiser and their gradients.

use crate::error::{ImdError, Result};

/// Dice smoothing constant.
pub const DICE_SMOOTH: f64 = 1.0;

fn same_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(ImdError::LengthMismatch { expected: a, actual: b });
    }
    Ok(())
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `||eps_hat - eps||^2` for one sample; summed over coordinates, not averaged.
pub fn loss_eps(eps_hat: &[f64], eps: &[f64]) -> Result<f64> {
    same_len(eps.len(), eps_hat.len())?;
    Ok(eps_hat.iter().zip(eps).map(|(a, b)| (a - b) * (a - b)).sum())
}

/// Mean of [`loss_eps`] over a batch of pairs.
pub fn loss_eps_batch(eps_hat: &[Vec<f64>], eps: &[Vec<f64>]) -> Result<f64> {
    same_len(eps.len(), eps_hat.len())?;
    if eps.is_empty() {
        return Err(ImdError::Empty("batch"));
    }
    let mut total = 0.0;
    for (a, b) in eps_hat.iter().zip(eps) {
        total += loss_eps(a, b)?;
    }
    Ok(total / eps.len() as f64)
}

/// Components of the mask loss for one sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaskLoss {
    pub dice: f64,
    pub bce: f64,
    pub total: f64,
}

/// Soft dice (smoothing 1) plus `lambda_ce` times mean binary cross-entropy,
/// on logits.
pub fn loss_mask_parts(logits: &[f64], target: &[f64], lambda_ce: f64) -> Result<MaskLoss> {
    same_len(target.len(), logits.len())?;
    if logits.is_empty() {
        return Err(ImdError::Empty("mask logits"));
    }
    if lambda_ce.is_nan() || lambda_ce < 0.0 {
        return Err(ImdError::invalid(format!("lambda_ce {lambda_ce} must be >= 0")));
    }
    let (mut inter, mut sp, mut sm, mut bce) = (0.0, 0.0, 0.0, 0.0);
    for (&l, &m) in logits.iter().zip(target) {
        let p = sigmoid(l);
        inter += p * m;
        sp += p;
        sm += m;
        // log(1 + e^l) - l*m, written to avoid overflow.
        bce += l.max(0.0) - l * m + (-l.abs()).exp().ln_1p();
    }
    let dice = 1.0 - (2.0 * inter + DICE_SMOOTH) / (sp + sm + DICE_SMOOTH);
    let bce = bce / logits.len() as f64;
    Ok(MaskLoss {
        dice,
        bce,
        total: dice + lambda_ce * bce,
    })
}

pub fn loss_mask(logits: &[f64], target: &[f64], lambda_ce: f64) -> Result<f64> {
    Ok(loss_mask_parts(logits, target, lambda_ce)?.total)
}

/// Gradient of [`loss_mask`] with respect to the logits.
pub fn loss_mask_grad(logits: &[f64], target: &[f64], lambda_ce: f64) -> Result<Vec<f64>> {
    same_len(target.len(), logits.len())?;
    if logits.is_empty() {
        return Err(ImdError::Empty("mask logits"));
    }
    let p: Vec<f64> = logits.iter().map(|&l| sigmoid(l)).collect();
    let inter: f64 = p.iter().zip(target).map(|(a, b)| a * b).sum();
    let denom = p.iter().sum::<f64>() + target.iter().sum::<f64>() + DICE_SMOOTH;
    let numer = 2.0 * inter + DICE_SMOOTH;
    let n = logits.len() as f64;
    Ok(p.iter()
        .zip(target)
        .map(|(&pi, &mi)| {
            let d_dice_dp = -(2.0 * mi * denom - numer) / (denom * denom);
            d_dice_dp * pi * (1.0 - pi) + lambda_ce * (pi - mi) / n
        })
        .collect())
}
