//! Plausibility flagging of predicted label maps.
//!
//! A structure in a frame is flagged when its volume lies more than two
//! standard deviations from the cohort mean, or when it splits into more than
//! one 26-connected component. Aorta and pulmonary artery are exempt from the
//! component rule: thin vessels fragment easily and are fixed post hoc.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{LabelVolume, PerStructure, Structure};
use crate::metrics::{connected_components, structure_surface_area_mm2, structure_volume_mm3};
use crate::stats::{mean, population_std};

/// Deviation from the cohort mean, in standard deviations, beyond which a
/// volume is an outlier.
pub const VOLUME_SIGMA_LIMIT: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructureStats {
    pub structure: Structure,
    pub volume_mm3: f64,
    pub surface_mm2: f64,
    pub component_count: usize,
}

/// One [`StructureStats`] per foreground structure, empty ones included.
pub fn collect_stats(vol: &LabelVolume) -> PerStructure<StructureStats> {
    PerStructure::from_fn(|s| StructureStats {
        structure: s,
        volume_mm3: structure_volume_mm3(vol, s),
        surface_mm2: structure_surface_area_mm2(vol, s),
        component_count: connected_components(vol, s).component_count,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeMoments {
    pub mean_mm3: f64,
    pub std_mm3: f64,
}

/// Per-structure population mean and standard deviation of volume over every
/// frame of the current iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CohortVolumeStats {
    pub per_structure: PerStructure<VolumeMoments>,
    pub frame_count: usize,
}

pub fn cohort_volume_stats(frames: &[PerStructure<StructureStats>]) -> Result<CohortVolumeStats> {
    if frames.len() < 2 {
        return Err(Error::TooFew {
            what: "cohort volume statistics",
            needed: 2,
            got: frames.len(),
        });
    }
    let per_structure = PerStructure::from_fn(|s| {
        let v: Vec<f64> = frames.iter().map(|f| f[s].volume_mm3).collect();
        VolumeMoments {
            mean_mm3: mean(&v).unwrap_or(0.0),
            std_mm3: population_std(&v).unwrap_or(0.0),
        }
    });
    Ok(CohortVolumeStats {
        per_structure,
        frame_count: frames.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagReason {
    VolumeOutlier,
    MultiComponent,
}

impl FlagReason {
    pub fn name(self) -> &'static str {
        match self {
            FlagReason::VolumeOutlier => "volume_outlier",
            FlagReason::MultiComponent => "multi_component",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlagResult {
    pub structure: Structure,
    pub flagged: bool,
    pub reasons: Vec<FlagReason>,
}

impl FlagResult {
    fn new(structure: Structure, reasons: Vec<FlagReason>) -> Self {
        Self {
            structure,
            flagged: !reasons.is_empty(),
            reasons,
        }
    }
}

/// `|v - mean| > 2 std`. A zero-spread cohort flags any deviation at all.
pub fn is_volume_outlier(volume: f64, m: &VolumeMoments) -> bool {
    (volume - m.mean_mm3).abs() > VOLUME_SIGMA_LIMIT * m.std_mm3
}

pub fn flag_frame(
    stats: &PerStructure<StructureStats>,
    cohort: &CohortVolumeStats,
) -> PerStructure<FlagResult> {
    PerStructure::from_fn(|s| {
        let st = &stats[s];
        let mut reasons = Vec::new();
        if is_volume_outlier(st.volume_mm3, &cohort.per_structure[s]) {
            reasons.push(FlagReason::VolumeOutlier);
        }
        if st.component_count > 1 && !s.is_vessel() {
            reasons.push(FlagReason::MultiComponent);
        }
        FlagResult::new(s, reasons)
    })
}

/// Per structure, the fraction of frames in which that structure is flagged.
pub fn flagged_fraction(frames: &[PerStructure<FlagResult>]) -> Result<PerStructure<f64>> {
    if frames.is_empty() {
        return Err(Error::TooFew {
            what: "flagged fraction",
            needed: 1,
            got: 0,
        });
    }
    Ok(PerStructure::from_fn(|s| {
        let hits = frames.iter().filter(|f| f[s].flagged).count();
        hits as f64 / frames.len() as f64
    }))
}

/// Stats, cohort and flags for a whole set of frames in one go.
pub fn flag_cohort(
    stats: &[PerStructure<StructureStats>],
) -> Result<(CohortVolumeStats, Vec<PerStructure<FlagResult>>)> {
    let cohort = cohort_volume_stats(stats)?;
    let flags = stats.iter().map(|st| flag_frame(st, &cohort)).collect();
    Ok((cohort, flags))
}
