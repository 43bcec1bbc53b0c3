//! Iterative pseudo-label self-training.
//!
//! Pseudo-labels start as the foundation segmenter's per-frame output. Each
//! round trains a fresh model on every (frame, current label) pair, then
//! overwrites every non-manual frame's label with that model's prediction.
//! Manually labelled studies can be mixed into training; their labels never
//! change. A report is emitted after initialisation (iteration 1) and after
//! every round.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::grid::{CineStudy, LabelVolume, PerStructure, Structure};
use crate::metrics::{assd, dice, hd95, surface_distances};
use crate::qc::{
    cohort_volume_stats, collect_stats, flag_frame, flagged_fraction, CohortVolumeStats,
    FlagResult, StructureStats,
};
use crate::rng::{mix64, substream};
use crate::segmenter::{FrameRef, Learner, SegmenterModel, TrainingPair};
use crate::stats::MeanStd;
use crate::student::TrainConfig;
use crate::temporal::{cohort_temporal_summary, temporal_report, TemporalReport, TemporalSummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    PseudoOnly,
    PseudoMixed,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::PseudoOnly => "pseudo_only",
            Mode::PseudoMixed => "pseudo_mixed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelfTrainConfig {
    pub rounds: usize,
    pub mode: Mode,
    /// Target share of manual frames in the training set (mixed mode).
    pub manual_fraction: f64,
    pub seed: u64,
    pub train: TrainConfig,
}

impl Default for SelfTrainConfig {
    fn default() -> Self {
        Self {
            rounds: 5,
            mode: Mode::PseudoOnly,
            manual_fraction: 0.05,
            seed: 11,
            train: TrainConfig::default(),
        }
    }
}

impl SelfTrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.mode == Mode::PseudoMixed
            && !(self.manual_fraction > 0.0 && self.manual_fraction < 1.0)
        {
            return Err(Error::InvalidConfig(String::from(
                "manual_fraction must lie in (0, 1) in pseudo_mixed mode",
            )));
        }
        Ok(())
    }

    /// Training seed of round `round` (1-based).
    pub fn round_seed(&self, round: usize) -> u64 {
        mix64(mix64(self.seed, self.train.seed), round as u64)
    }
}

/// Ground-truth label maps by subject, used only for evaluation.
#[derive(Debug, Clone, Default)]
pub struct GroundTruth {
    frames: BTreeMap<String, Vec<LabelVolume>>,
}

impl GroundTruth {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, subject_id: impl Into<String>, frames: Vec<LabelVolume>) {
        self.frames.insert(subject_id.into(), frames);
    }

    pub fn get(&self, subject_id: &str) -> Option<&[LabelVolume]> {
        self.frames.get(subject_id).map(Vec::as_slice)
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameFlags {
    pub subject_id: String,
    pub frame_index: usize,
    pub flags: PerStructure<FlagResult>,
}

/// Per-structure agreement with ground truth over all evaluated frames.
/// Undefined values (structure absent from both maps) are left out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthMetrics {
    pub dice: Option<MeanStd>,
    pub hd95_mm: Option<MeanStd>,
    pub assd_mm: Option<MeanStd>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub final_loss: f64,
    pub pseudo_frames: usize,
    pub manual_frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    /// 1 = initial foundation predictions.
    pub iteration: usize,
    pub flagged_fraction: PerStructure<f64>,
    pub cohort: Option<CohortVolumeStats>,
    pub frame_flags: Vec<FrameFlags>,
    pub temporal: Vec<TemporalReport>,
    pub temporal_summary: Option<PerStructure<TemporalSummary>>,
    pub truth_metrics: Option<PerStructure<TruthMetrics>>,
    pub training: Option<TrainingSummary>,
}

impl IterationReport {
    pub fn mean_flagged_fraction(&self) -> f64 {
        self.flagged_fraction.0.iter().sum::<f64>() / 7.0
    }
}

fn pseudo_frames(studies: &[CineStudy]) -> Vec<(usize, usize)> {
    studies
        .iter()
        .enumerate()
        .filter(|(_, s)| !s.is_manual())
        .flat_map(|(i, s)| (0..s.frame_count()).map(move |t| (i, t)))
        .collect()
}

/// Predicts every `(study, frame)` in `targets`; the first failure aborts.
fn predict_all<S: SegmenterModel, E: Executor>(
    studies: &[CineStudy],
    targets: &[(usize, usize)],
    model: &S,
    exec: &E,
) -> Result<Vec<LabelVolume>> {
    exec.map(targets, |_, &(i, t)| {
        let st = &studies[i];
        model.predict(FrameRef {
            subject_id: st.subject_id(),
            frame_index: t,
            image: &st.frames()[t].image,
        })
    })
    .into_iter()
    .collect()
}

/// Writes predictions back study by study. Callers predict everything first,
/// so a failed prediction never leaves a half-updated set.
fn commit(
    studies: &mut [CineStudy],
    targets: &[(usize, usize)],
    labels: Vec<LabelVolume>,
) -> Result<()> {
    let mut per_study: BTreeMap<usize, Vec<LabelVolume>> = BTreeMap::new();
    for (&(i, _), l) in targets.iter().zip(labels) {
        per_study.entry(i).or_default().push(l);
    }
    for (i, labels) in per_study {
        studies[i].replace_labels(labels)?;
    }
    Ok(())
}

/// Sets every non-manual frame's label to the foundation model's prediction.
pub fn initialize_pseudo_labels<S: SegmenterModel, E: Executor>(
    studies: &mut [CineStudy],
    foundation: &S,
    exec: &E,
) -> Result<()> {
    let targets = pseudo_frames(studies);
    let labels = predict_all(studies, &targets, foundation, exec)?;
    commit(studies, &targets, labels)
}

/// Manual frames mixed into training: `round(f / (1 - f) * pseudo_frames)`,
/// at least one, drawn without replacement from the manual studies with the
/// run seed. The selection is the same every round.
pub fn manual_selection(
    studies: &[CineStudy],
    cfg: &SelfTrainConfig,
) -> Result<Vec<(usize, usize)>> {
    if cfg.mode == Mode::PseudoOnly {
        return Ok(Vec::new());
    }
    let mut pool: Vec<(usize, usize)> = studies
        .iter()
        .enumerate()
        .filter(|(_, s)| s.is_manual())
        .flat_map(|(i, s)| (0..s.frame_count()).map(move |t| (i, t)))
        .collect();
    if pool.is_empty() {
        return Err(Error::InvalidConfig(String::from(
            "pseudo_mixed mode needs at least one study marked is_manual",
        )));
    }
    let pseudo = pseudo_frames(studies).len() as f64;
    let f = cfg.manual_fraction;
    let wanted = libm::round(f / (1.0 - f) * pseudo).max(1.0) as usize;
    pool.shuffle(&mut substream(cfg.seed, 0x6d61_6e75_616c));
    pool.truncate(wanted.min(pool.len()));
    pool.sort_unstable();
    Ok(pool)
}

/// One round: train a fresh model on all current pairs (plus the manual
/// selection), then relabel every non-manual frame with it.
pub fn run_round<L: Learner, E: Executor>(
    studies: &mut [CineStudy],
    learner: &L,
    cfg: &SelfTrainConfig,
    round: usize,
    exec: &E,
) -> Result<(L::Model, TrainingSummary)> {
    let targets = pseudo_frames(studies);
    let manual = manual_selection(studies, cfg)?;
    let pairs: Vec<TrainingPair<'_>> = targets
        .iter()
        .chain(manual.iter())
        .map(|&(i, t)| {
            let f = &studies[i].frames()[t];
            (&f.image, &f.labels)
        })
        .collect();
    let model = learner.train(&pairs, cfg.round_seed(round), exec)?;
    let labels = predict_all(studies, &targets, &model, exec)?;
    commit(studies, &targets, labels)?;
    let summary = TrainingSummary {
        final_loss: model.training_loss().unwrap_or(f64::NAN),
        pseudo_frames: targets.len(),
        manual_frames: manual.len(),
    };
    Ok((model, summary))
}

/// QC, temporal and (when truth is given) accuracy statistics for the current
/// labels of all non-manual studies.
pub fn iteration_report<E: Executor>(
    iteration: usize,
    studies: &[CineStudy],
    truth: Option<&GroundTruth>,
    exec: &E,
) -> Result<IterationReport> {
    let targets = pseudo_frames(studies);
    let stats: Vec<PerStructure<StructureStats>> = exec.map(&targets, |_, &(i, t)| {
        collect_stats(&studies[i].frames()[t].labels)
    });
    // Fewer than two frames leaves the volume rule without a cohort.
    let cohort = cohort_volume_stats(&stats).ok();
    let frame_flags: Vec<FrameFlags> = targets
        .iter()
        .zip(&stats)
        .map(|(&(i, t), st)| FrameFlags {
            subject_id: String::from(studies[i].subject_id()),
            frame_index: t,
            flags: match &cohort {
                Some(c) => flag_frame(st, c),
                None => components_only(st),
            },
        })
        .collect();
    let flag_sets: Vec<_> = frame_flags.iter().map(|f| f.flags.clone()).collect();
    let flagged = if flag_sets.is_empty() {
        PerStructure::from_fn(|_| 0.0)
    } else {
        flagged_fraction(&flag_sets)?
    };

    let pseudo: Vec<&CineStudy> = studies.iter().filter(|s| !s.is_manual()).collect();
    let temporal: Vec<TemporalReport> = exec.map(&pseudo, |_, st| temporal_report(st));
    let temporal_summary = cohort_temporal_summary(&temporal).ok();

    let truth_metrics = match truth {
        Some(gt) if !gt.is_empty() => Some(truth_metrics(studies, &targets, gt, exec)?),
        _ => None,
    };

    Ok(IterationReport {
        iteration,
        flagged_fraction: flagged,
        cohort,
        frame_flags,
        temporal,
        temporal_summary,
        truth_metrics,
        training: None,
    })
}

fn components_only(st: &PerStructure<StructureStats>) -> PerStructure<FlagResult> {
    let cohort = CohortVolumeStats {
        per_structure: PerStructure::from_fn(|_| crate::qc::VolumeMoments {
            mean_mm3: 0.0,
            std_mm3: f64::INFINITY,
        }),
        frame_count: 1,
    };
    flag_frame(st, &cohort)
}

type FrameAccuracy = PerStructure<(Option<f64>, Option<(f64, f64)>)>;

fn truth_metrics<E: Executor>(
    studies: &[CineStudy],
    targets: &[(usize, usize)],
    gt: &GroundTruth,
    exec: &E,
) -> Result<PerStructure<TruthMetrics>> {
    let per_frame: Vec<Result<Option<FrameAccuracy>>> = exec.map(targets, |_, &(i, t)| {
        let st = &studies[i];
        let Some(truth) = gt.get(st.subject_id()).and_then(|f| f.get(t)) else {
            return Ok(None);
        };
        let pred = &st.frames()[t].labels;
        let mut row: FrameAccuracy = PerStructure::from_fn(|_| (None, None));
        for s in Structure::FOREGROUND {
            let d = dice(pred, truth, s)?;
            let sd = surface_distances(pred, truth, s)?;
            row[s] = (d, sd.map(|sd| (hd95(&sd), assd(&sd))));
        }
        Ok(Some(row))
    });
    let rows: Vec<FrameAccuracy> = per_frame
        .into_iter()
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    Ok(PerStructure::from_fn(|s| {
        let d: Vec<f64> = rows.iter().filter_map(|r| r[s].0).collect();
        let h: Vec<f64> = rows.iter().filter_map(|r| r[s].1.map(|v| v.0)).collect();
        let a: Vec<f64> = rows.iter().filter_map(|r| r[s].1.map(|v| v.1)).collect();
        TruthMetrics {
            dice: MeanStd::of(&d),
            hd95_mm: MeanStd::of(&h),
            assd_mm: MeanStd::of(&a),
        }
    }))
}

#[derive(Debug, Clone)]
pub struct SelfTrainOutcome<M> {
    /// Model of the last completed round; `None` when no round ran.
    pub model: Option<M>,
    pub studies: Vec<CineStudy>,
    pub reports: Vec<IterationReport>,
}

/// A run that stopped early, with every report produced before the failure.
#[derive(Debug, Clone, thiserror::Error)]
#[error("self-training stopped after {} report(s): {error}", reports.len())]
pub struct SelfTrainFailure {
    pub error: Error,
    pub reports: Vec<IterationReport>,
}

/// Full loop: initialise, report, then `rounds` x (round, report).
///
/// `on_report` sees each report together with the labels it describes, as
/// soon as it exists.
pub fn run_self_training<S, L, E, F>(
    mut studies: Vec<CineStudy>,
    truth: Option<&GroundTruth>,
    foundation: &S,
    learner: &L,
    cfg: &SelfTrainConfig,
    exec: &E,
    mut on_report: F,
) -> core::result::Result<SelfTrainOutcome<L::Model>, SelfTrainFailure>
where
    S: SegmenterModel,
    L: Learner,
    E: Executor,
    F: FnMut(&IterationReport, &[CineStudy]),
{
    let mut reports = Vec::new();
    macro_rules! attempt {
        ($e:expr) => {
            match $e {
                Ok(v) => v,
                Err(error) => return Err(SelfTrainFailure { error, reports }),
            }
        };
    }
    attempt!(cfg.validate());
    attempt!(manual_selection(&studies, cfg));

    attempt!(initialize_pseudo_labels(&mut studies, foundation, exec));
    let first = attempt!(iteration_report(1, &studies, truth, exec));
    on_report(&first, &studies);
    reports.push(first);

    let mut model = None;
    for round in 1..=cfg.rounds {
        let (m, summary) = attempt!(run_round(&mut studies, learner, cfg, round, exec));
        let mut report = attempt!(iteration_report(round + 1, &studies, truth, exec));
        report.training = Some(summary);
        on_report(&report, &studies);
        reports.push(report);
        model = Some(m);
    }
    Ok(SelfTrainOutcome {
        model,
        studies,
        reports,
    })
}
