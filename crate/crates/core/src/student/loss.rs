//! Combined cross-entropy and soft Dice loss with analytic logit gradients.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{LabelVolume, NUM_CLASSES};

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` inside the log.
pub const PROB_CLAMP: f64 = 1e-7;
/// Soft Dice smoothing term.
pub const DICE_EPSILON: f64 = 1e-5;
const NORMALISATION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub ce: f64,
    pub dice: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { ce: 1.0, dice: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub loss: f64,
    pub cross_entropy: f64,
    /// Mean soft Dice over the classes present in the target.
    pub mean_soft_dice: f64,
    /// `dL/dz`, row-major `voxels x NUM_CLASSES`.
    pub grad_logits: Vec<f64>,
}

/// Row-wise softmax of `voxels x NUM_CLASSES` logits.
pub fn softmax_rows(logits: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; logits.len()];
    for (z, p) in logits
        .chunks_exact(NUM_CLASSES)
        .zip(out.chunks_exact_mut(NUM_CLASSES))
    {
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for (pi, &zi) in p.iter_mut().zip(z) {
            *pi = libm::exp(zi - m);
            total += *pi;
        }
        p.iter_mut().for_each(|v| *v /= total);
    }
    out
}

/// `ce * CE + dice * (1 - mean soft Dice)` and its gradient w.r.t. the logits
/// that produced `probs` through a softmax.
pub fn combined_loss(probs: &[f64], target: &[u8], weights: LossWeights) -> Result<LossOutput> {
    let n = target.len();
    if probs.len() != n * NUM_CLASSES {
        return Err(Error::LengthMismatch {
            expected: n * NUM_CLASSES,
            actual: probs.len(),
        });
    }
    if n == 0 {
        return Err(Error::TooFew {
            what: "loss evaluation",
            needed: 1,
            got: 0,
        });
    }
    for (voxel, row) in probs.chunks_exact(NUM_CLASSES).enumerate() {
        let sum: f64 = row.iter().sum();
        let off = (sum - 1.0).abs();
        if off.is_nan() || off > NORMALISATION_TOLERANCE {
            return Err(Error::NotNormalized { voxel, sum });
        }
    }
    if let Some(index) = target.iter().position(|&c| c as usize >= NUM_CLASSES) {
        return Err(Error::LabelOutOfRange {
            index,
            code: target[index],
        });
    }

    let nf = n as f64;
    let mut sum_p = [0.0; NUM_CLASSES];
    let mut sum_y = [0.0; NUM_CLASSES];
    let mut inter = [0.0; NUM_CLASSES];
    let mut ce = 0.0;
    for (row, &t) in probs.chunks_exact(NUM_CLASSES).zip(target) {
        for c in 0..NUM_CLASSES {
            sum_p[c] += row[c];
        }
        let t = t as usize;
        sum_y[t] += 1.0;
        inter[t] += row[t];
        ce -= libm::log(row[t].clamp(PROB_CLAMP, 1.0 - PROB_CLAMP));
    }
    ce /= nf;

    let present: Vec<usize> = (0..NUM_CLASSES).filter(|&c| sum_y[c] > 0.0).collect();
    let n_present = present.len() as f64;
    let mut denom = [0.0; NUM_CLASSES];
    let mut soft = [0.0; NUM_CLASSES];
    let mut dice_sum = 0.0;
    for &c in &present {
        denom[c] = sum_p[c] + sum_y[c] + DICE_EPSILON;
        soft[c] = (2.0 * inter[c] + DICE_EPSILON) / denom[c];
        dice_sum += soft[c];
    }
    let mean_soft_dice = dice_sum / n_present;
    let loss = weights.ce * ce + weights.dice * (1.0 - mean_soft_dice);

    let mut grad_logits = vec![0.0; probs.len()];
    let mut g = [0.0; NUM_CLASSES];
    for ((row, &t), out) in probs
        .chunks_exact(NUM_CLASSES)
        .zip(target)
        .zip(grad_logits.chunks_exact_mut(NUM_CLASSES))
    {
        let t = t as usize;
        g.fill(0.0);
        // dCE/dp_t, zero where the clamp is active
        if row[t] > PROB_CLAMP && row[t] < 1.0 - PROB_CLAMP {
            g[t] -= weights.ce / (nf * row[t]);
        }
        // d(1 - mean D)/dp_c = -(1/C) (2 y_c S_c - (2 I_c + eps)) / S_c^2
        for &c in &present {
            let y = if c == t { 1.0 } else { 0.0 };
            let d = (2.0 * y * denom[c] - (2.0 * inter[c] + DICE_EPSILON)) / (denom[c] * denom[c]);
            g[c] -= weights.dice * d / n_present;
        }
        let dot: f64 = row.iter().zip(&g).map(|(p, gi)| p * gi).sum();
        for c in 0..NUM_CLASSES {
            out[c] = row[c] * (g[c] - dot);
        }
    }

    Ok(LossOutput {
        loss,
        cross_entropy: ce,
        mean_soft_dice,
        grad_logits,
    })
}

/// [`combined_loss`] against a whole label volume.
pub fn combined_loss_volume(
    probs: &[f64],
    target: &LabelVolume,
    weights: LossWeights,
) -> Result<LossOutput> {
    combined_loss(probs, target.labels(), weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_prediction() {
        let target = [0u8, 2, 2, 5];
        let mut probs = vec![0.0; 4 * NUM_CLASSES];
        for (i, &t) in target.iter().enumerate() {
            probs[i * NUM_CLASSES + t as usize] = 1.0;
        }
        let out = combined_loss(&probs, &target, LossWeights::default()).unwrap();
        assert!((out.mean_soft_dice - 1.0).abs() < 1e-15);
        assert!((out.cross_entropy - 1e-7).abs() < 1e-12);
        assert!(out.loss < 2e-7);
    }

    #[test]
    fn uniform_prediction_cross_entropy() {
        let probs = vec![1.0 / 8.0; 3 * NUM_CLASSES];
        let w = LossWeights { ce: 1.0, dice: 0.0 };
        let out = combined_loss(&probs, &[1, 4, 7], w).unwrap();
        assert!((out.cross_entropy - libm::log(8.0)).abs() < 1e-12);
        assert!((out.loss - 2.079_441_541_679_836).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let probs = vec![0.2; NUM_CLASSES];
        assert!(matches!(
            combined_loss(&probs, &[0], LossWeights::default()),
            Err(Error::NotNormalized { voxel: 0, .. })
        ));
        let ok = vec![1.0 / 8.0; NUM_CLASSES];
        assert!(matches!(
            combined_loss(&ok, &[0, 1], LossWeights::default()),
            Err(Error::LengthMismatch { .. })
        ));
    }
}
