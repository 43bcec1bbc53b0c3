//! Temporal-consistency analytics over a cine study: volume-time curves,
//! frame-to-frame Dice spread and extreme-point counts.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CineStudy, PerStructure, Structure};
use crate::metrics::{dice, structure_volume_mm3};
use crate::stats::{population_std, MeanStd};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeCurve {
    pub structure: Structure,
    /// mm³ per frame.
    pub values: Vec<f64>,
}

pub fn volume_curve(study: &CineStudy, s: Structure) -> VolumeCurve {
    VolumeCurve {
        structure: s,
        values: study.labels().map(|l| structure_volume_mm3(l, s)).collect(),
    }
}

/// Dice between frames `t` and `t + 1`; no wrap-around from the last frame.
pub fn consecutive_dice(study: &CineStudy, s: Structure) -> Vec<Option<f64>> {
    study
        .frames()
        .windows(2)
        .map(|w| dice(&w[0].labels, &w[1].labels, s).expect("frames of a study share a grid"))
        .collect()
}

/// Population std of consecutive-frame Dice. Pairs where the structure is
/// absent from both frames are skipped.
pub fn frame_dice_std(study: &CineStudy, s: Structure) -> Result<f64> {
    if study.frame_count() < 3 {
        return Err(Error::TooFew {
            what: "frame-to-frame Dice",
            needed: 3,
            got: study.frame_count(),
        });
    }
    let defined: Vec<f64> = consecutive_dice(study, s).into_iter().flatten().collect();
    if defined.len() < 2 {
        return Err(Error::TooFew {
            what: "defined consecutive Dice pairs",
            needed: 2,
            got: defined.len(),
        });
    }
    Ok(population_std(&defined).expect("non-empty"))
}

/// Interior local extrema after collapsing runs of equal values. Endpoints
/// never count; comparisons are strict.
pub fn count_extremes(values: &[f64]) -> Result<usize> {
    if values.len() < 3 {
        return Err(Error::TooFew {
            what: "extreme-point count",
            needed: 3,
            got: values.len(),
        });
    }
    let mut compressed: Vec<f64> = Vec::with_capacity(values.len());
    for &v in values {
        if compressed.last() != Some(&v) {
            compressed.push(v);
        }
    }
    Ok(compressed
        .windows(3)
        .filter(|w| (w[1] > w[0] && w[1] > w[2]) || (w[1] < w[0] && w[1] < w[2]))
        .count())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureTemporal {
    pub dice_std: Option<f64>,
    pub extreme_count: Option<usize>,
    pub curve: VolumeCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalReport {
    pub subject_id: String,
    pub per_structure: PerStructure<StructureTemporal>,
}

pub fn temporal_report(study: &CineStudy) -> TemporalReport {
    TemporalReport {
        subject_id: String::from(study.subject_id()),
        per_structure: PerStructure::from_fn(|s| {
            let curve = volume_curve(study, s);
            StructureTemporal {
                dice_std: frame_dice_std(study, s).ok(),
                extreme_count: count_extremes(&curve.values).ok(),
                curve,
            }
        }),
    }
}

/// One row of the cohort summary: mean ± std across subjects.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemporalSummary {
    pub dice_std: Option<MeanStd>,
    pub extreme_count: Option<MeanStd>,
}

pub fn cohort_temporal_summary(
    reports: &[TemporalReport],
) -> Result<PerStructure<TemporalSummary>> {
    if reports.is_empty() {
        return Err(Error::TooFew {
            what: "temporal summary",
            needed: 1,
            got: 0,
        });
    }
    Ok(PerStructure::from_fn(|s| {
        let d: Vec<f64> = reports
            .iter()
            .filter_map(|r| r.per_structure[s].dice_std)
            .collect();
        let e: Vec<f64> = reports
            .iter()
            .filter_map(|r| r.per_structure[s].extreme_count.map(|c| c as f64))
            .collect();
        TemporalSummary {
            dice_std: MeanStd::of(&d),
            extreme_count: MeanStd::of(&e),
        }
    }))
}
