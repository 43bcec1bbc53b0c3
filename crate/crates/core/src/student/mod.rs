//! Desk-scale student segmenter: a multinomial linear classifier over
//! per-voxel features, trained with the combined Dice + cross-entropy loss.

mod features;
mod loss;

pub use features::{
    extract_features, gaussian_smooth, gradient_magnitude, FeatureField, IntensityNormalization,
    NUM_FEATURES, SMOOTHING_SCALES,
};
pub use loss::{
    combined_loss, combined_loss_volume, softmax_rows, LossOutput, LossWeights, DICE_EPSILON,
    PROB_CLAMP,
};

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::grid::{LabelVolume, ScalarVolume, Structure, NUM_CLASSES};
use crate::metrics::keep_largest_component;
use crate::rng::substream;
use crate::segmenter::{FrameRef, Learner, SegmenterModel, TrainingPair};

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Voxels per mini-batch. `0` selects full-frame batches: every epoch
    /// takes one step per training pair, in order, on all of its voxels.
    pub batch_voxels: usize,
    /// Mini-batches per epoch when `batch_voxels > 0`.
    pub steps_per_epoch: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Sample a class uniformly, then a voxel of that class.
    pub class_balance: bool,
    pub dice_weight: f64,
    pub ce_weight: f64,
    pub postprocess_largest_component: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_voxels: 2048,
            steps_per_epoch: 8,
            learning_rate: 0.4,
            seed: 1,
            class_balance: false,
            dice_weight: 1.0,
            ce_weight: 1.0,
            postprocess_largest_component: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(String::from(m)));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_voxels > 0 && self.steps_per_epoch == 0 {
            return bad("steps_per_epoch must be at least 1");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        let w = [self.dice_weight, self.ce_weight];
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) || w[0] + w[1] <= 0.0 {
            return bad("loss weights must be non-negative with a positive sum");
        }
        Ok(())
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            ce: self.ce_weight,
            dice: self.dice_weight,
        }
    }
}

/// Trained weights plus everything needed to featurise new frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentModel {
    /// One row of feature weights per class.
    pub weights: [[f64; NUM_FEATURES]; NUM_CLASSES],
    pub normalization: IntensityNormalization,
    pub epochs_run: usize,
    pub final_loss: f64,
    pub postprocess_largest_component: bool,
}

impl StudentModel {
    pub fn zeros(normalization: IntensityNormalization) -> Self {
        Self {
            weights: [[0.0; NUM_FEATURES]; NUM_CLASSES],
            normalization,
            epochs_run: 0,
            final_loss: f64::NAN,
            postprocess_largest_component: true,
        }
    }

    #[inline]
    fn logits(&self, f: &[f64; NUM_FEATURES]) -> [f64; NUM_CLASSES] {
        core::array::from_fn(|c| self.weights[c].iter().zip(f).map(|(w, x)| w * x).sum())
    }

    pub fn validate(&self) -> Result<()> {
        self.normalization.validate()?;
        if self.weights.iter().flatten().any(|w| !w.is_finite()) {
            return Err(Error::InvalidConfig(String::from(
                "model weights are not finite",
            )));
        }
        Ok(())
    }
}

/// Index of the largest logit; ties go to the lowest class code.
#[inline]
pub fn argmax(logits: &[f64; NUM_CLASSES]) -> u8 {
    let mut best = 0;
    for c in 1..NUM_CLASSES {
        if logits[c] > logits[best] {
            best = c;
        }
    }
    best as u8
}

pub fn predict(model: &StudentModel, frame: &ScalarVolume) -> Result<LabelVolume> {
    model.validate()?;
    let field = extract_features(frame, &model.normalization);
    let labels = (0..frame.shape().len())
        .map(|i| argmax(&model.logits(&field.row(i))))
        .collect();
    let mut out = LabelVolume::new(frame.shape(), frame.spacing(), labels)?;
    if model.postprocess_largest_component {
        for s in Structure::FOREGROUND.into_iter().filter(|s| !s.is_vessel()) {
            out = keep_largest_component(&out, s);
        }
    }
    Ok(out)
}

impl SegmenterModel for StudentModel {
    fn predict(&self, frame: FrameRef<'_>) -> Result<LabelVolume> {
        predict(self, frame.image)
    }

    fn training_loss(&self) -> Option<f64> {
        Some(self.final_loss)
    }
}

/// Feature rows and targets assembled for training.
struct Samples {
    rows: Vec<[f64; NUM_FEATURES]>,
    labels: Vec<u8>,
}

/// Trains a fresh model from zero weights with Adam on the combined loss.
pub fn train<E: Executor>(
    pairs: &[TrainingPair<'_>],
    cfg: &TrainConfig,
    exec: &E,
) -> Result<StudentModel> {
    cfg.validate()?;
    let Some((first, _)) = pairs.first() else {
        return Err(Error::TooFew {
            what: "training set",
            needed: 1,
            got: 0,
        });
    };
    for (img, lbl) in pairs {
        let same = img.shape() == first.shape()
            && img.spacing() == first.spacing()
            && lbl.shape() == first.shape()
            && lbl.spacing() == first.spacing();
        if !same {
            return Err(Error::GridMismatch);
        }
    }
    let norm = IntensityNormalization::fit(pairs.iter().map(|(img, _)| *img));
    let mut model = StudentModel::zeros(norm);
    model.postprocess_largest_component = cfg.postprocess_largest_component;
    let mut opt = Adam::new(cfg.learning_rate);

    let mut last_epoch_loss = f64::NAN;
    if cfg.batch_voxels == 0 {
        let per_pair: Vec<Samples> = exec.map(pairs, |_, (img, lbl)| {
            let field = extract_features(img, &norm);
            Samples {
                rows: (0..img.shape().len()).map(|i| field.row(i)).collect(),
                labels: lbl.labels().to_vec(),
            }
        });
        for epoch in 0..cfg.epochs {
            let mut total = 0.0;
            for s in &per_pair {
                total += step(&mut model, &mut opt, &s.rows, &s.labels, cfg, epoch)?;
            }
            last_epoch_loss = total / per_pair.len() as f64;
        }
    } else {
        let samples = draw_samples(pairs, cfg, &norm, exec);
        let b = cfg.batch_voxels;
        for epoch in 0..cfg.epochs {
            let mut total = 0.0;
            for k in 0..cfg.steps_per_epoch {
                let start = (epoch * cfg.steps_per_epoch + k) * b;
                let rows = &samples.rows[start..start + b];
                let labels = &samples.labels[start..start + b];
                total += step(&mut model, &mut opt, rows, labels, cfg, epoch)?;
            }
            last_epoch_loss = total / cfg.steps_per_epoch as f64;
        }
    }
    model.epochs_run = cfg.epochs;
    model.final_loss = last_epoch_loss;
    Ok(model)
}

/// One optimiser step on a batch; returns the batch loss.
fn step(
    model: &mut StudentModel,
    opt: &mut Adam,
    rows: &[[f64; NUM_FEATURES]],
    labels: &[u8],
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<f64> {
    let mut logits = Vec::with_capacity(rows.len() * NUM_CLASSES);
    for r in rows {
        logits.extend_from_slice(&model.logits(r));
    }
    if logits.iter().any(|z| !z.is_finite()) {
        return Err(Error::Diverged { epoch });
    }
    let probs = softmax_rows(&logits);
    let out = combined_loss(&probs, labels, cfg.loss_weights())?;
    if !out.loss.is_finite() {
        return Err(Error::Diverged { epoch });
    }
    let mut grad = [[0.0; NUM_FEATURES]; NUM_CLASSES];
    for (r, gz) in rows.iter().zip(out.grad_logits.chunks_exact(NUM_CLASSES)) {
        for c in 0..NUM_CLASSES {
            for (g, x) in grad[c].iter_mut().zip(r) {
                *g += gz[c] * x;
            }
        }
    }
    opt.update(&mut model.weights, &grad);
    if model.weights.iter().flatten().any(|w| !w.is_finite()) {
        return Err(Error::Diverged { epoch });
    }
    Ok(out.loss)
}

/// Draws the whole sampling schedule up front, then featurises each pair once
/// and gathers only the rows the schedule needs.
fn draw_samples<E: Executor>(
    pairs: &[TrainingPair<'_>],
    cfg: &TrainConfig,
    norm: &IntensityNormalization,
    exec: &E,
) -> Samples {
    let total = cfg.epochs * cfg.steps_per_epoch * cfg.batch_voxels;
    let mut rng = substream(cfg.seed, 0);

    let counts: Vec<[usize; NUM_CLASSES]> = pairs
        .iter()
        .map(|(_, l)| {
            let mut c = [0usize; NUM_CLASSES];
            l.labels().iter().for_each(|&v| c[v as usize] += 1);
            c
        })
        .collect();
    let class_total: [usize; NUM_CLASSES] =
        core::array::from_fn(|c| counts.iter().map(|k| k[c]).sum());
    let present: Vec<usize> = (0..NUM_CLASSES).filter(|&c| class_total[c] > 0).collect();
    let voxels = pairs[0].0.shape().len();

    // Requests per pair: (schedule slot, class, rank among that class's voxels)
    // in balanced mode, or (slot, _, voxel index) otherwise.
    let mut requests: Vec<Vec<(usize, u8, usize)>> = vec![Vec::new(); pairs.len()];
    for slot in 0..total {
        if cfg.class_balance {
            let c = present[rng.random_range(0..present.len())];
            let mut k = rng.random_range(0..class_total[c]);
            let mut p = 0;
            while k >= counts[p][c] {
                k -= counts[p][c];
                p += 1;
            }
            requests[p].push((slot, c as u8, k));
        } else {
            let g = rng.random_range(0..voxels * pairs.len());
            requests[g / voxels].push((slot, 0, g % voxels));
        }
    }

    let gathered: Vec<Vec<(usize, [f64; NUM_FEATURES], u8)>> = exec.map(pairs, |p, (img, lbl)| {
        let field = extract_features(img, norm);
        let by_class: [Vec<u32>; NUM_CLASSES] = if cfg.class_balance {
            let mut lists: [Vec<u32>; NUM_CLASSES] = Default::default();
            for (i, &c) in lbl.labels().iter().enumerate() {
                lists[c as usize].push(i as u32);
            }
            lists
        } else {
            Default::default()
        };
        requests[p]
            .iter()
            .map(|&(slot, c, k)| {
                let voxel = if cfg.class_balance {
                    by_class[c as usize][k] as usize
                } else {
                    k
                };
                (slot, field.row(voxel), lbl.labels()[voxel])
            })
            .collect()
    });

    let mut rows = vec![[0.0; NUM_FEATURES]; total];
    let mut labels = vec![0u8; total];
    for (slot, row, label) in gathered.into_iter().flatten() {
        rows[slot] = row;
        labels[slot] = label;
    }
    Samples { rows, labels }
}

struct Adam {
    lr: f64,
    t: i32,
    m: [[f64; NUM_FEATURES]; NUM_CLASSES],
    v: [[f64; NUM_FEATURES]; NUM_CLASSES],
}

impl Adam {
    fn new(lr: f64) -> Self {
        Self {
            lr,
            t: 0,
            m: [[0.0; NUM_FEATURES]; NUM_CLASSES],
            v: [[0.0; NUM_FEATURES]; NUM_CLASSES],
        }
    }

    fn update(
        &mut self,
        w: &mut [[f64; NUM_FEATURES]; NUM_CLASSES],
        g: &[[f64; NUM_FEATURES]; NUM_CLASSES],
    ) {
        self.t += 1;
        let b1t = 1.0 - libm::pow(ADAM_BETA1, f64::from(self.t));
        let b2t = 1.0 - libm::pow(ADAM_BETA2, f64::from(self.t));
        for c in 0..NUM_CLASSES {
            for k in 0..NUM_FEATURES {
                let gi = g[c][k];
                self.m[c][k] = ADAM_BETA1 * self.m[c][k] + (1.0 - ADAM_BETA1) * gi;
                self.v[c][k] = ADAM_BETA2 * self.v[c][k] + (1.0 - ADAM_BETA2) * gi * gi;
                let mh = self.m[c][k] / b1t;
                let vh = self.v[c][k] / b2t;
                w[c][k] -= self.lr * mh / (libm::sqrt(vh) + ADAM_EPSILON);
            }
        }
    }
}

/// [`Learner`] producing [`StudentModel`]s; the per-call seed replaces
/// `cfg.seed`.
#[derive(Debug, Clone, Copy, Default)]
pub struct StudentLearner {
    pub cfg: TrainConfig,
}

impl Learner for StudentLearner {
    type Model = StudentModel;

    fn train<E: Executor>(
        &self,
        pairs: &[TrainingPair<'_>],
        seed: u64,
        exec: &E,
    ) -> Result<StudentModel> {
        let cfg = TrainConfig { seed, ..self.cfg };
        train(pairs, &cfg, exec)
    }
}
