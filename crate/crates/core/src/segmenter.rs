//! Pluggable segmenter interface consumed by the self-training loop.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::grid::{CineStudy, LabelVolume, ScalarVolume};

/// A frame handed to a segmenter, together with where it came from.
#[derive(Debug, Clone, Copy)]
pub struct FrameRef<'a> {
    pub subject_id: &'a str,
    pub frame_index: usize,
    pub image: &'a ScalarVolume,
}

/// Anything that maps an intensity frame to a label map.
pub trait SegmenterModel: Sync {
    fn predict(&self, frame: FrameRef<'_>) -> Result<LabelVolume>;

    /// Final training loss, for models that were fitted by gradient descent.
    fn training_loss(&self) -> Option<f64> {
        None
    }
}

/// One (image, target) training example.
pub type TrainingPair<'a> = (&'a ScalarVolume, &'a LabelVolume);

/// Produces a fresh model from labelled frames.
pub trait Learner: Sync {
    type Model: SegmenterModel;

    fn train<E: Executor>(
        &self,
        pairs: &[TrainingPair<'_>],
        seed: u64,
        exec: &E,
    ) -> Result<Self::Model>;
}

/// Segmenter that replays label maps computed elsewhere (for example an
/// external foundation model run offline), keyed by subject and frame.
#[derive(Debug, Clone, Default)]
pub struct PrecomputedLabels {
    labels: BTreeMap<String, Vec<LabelVolume>>,
}

impl PrecomputedLabels {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, subject_id: impl Into<String>, frames: Vec<LabelVolume>) {
        self.labels.insert(subject_id.into(), frames);
    }

    /// Uses the labels currently stored in each study.
    pub fn from_studies<'a>(studies: impl IntoIterator<Item = &'a CineStudy>) -> Self {
        let mut out = Self::new();
        for st in studies {
            out.insert(st.subject_id(), st.labels().cloned().collect());
        }
        out
    }
}

impl SegmenterModel for PrecomputedLabels {
    fn predict(&self, frame: FrameRef<'_>) -> Result<LabelVolume> {
        let found = self
            .labels
            .get(frame.subject_id)
            .and_then(|frames| frames.get(frame.frame_index));
        match found {
            Some(l) if l.shape() == frame.image.shape() && l.spacing() == frame.image.spacing() => {
                Ok(l.clone())
            }
            Some(_) => Err(segmentation_error(
                frame,
                "stored labels are on a different grid",
            )),
            None => Err(segmentation_error(frame, "no stored labels for this frame")),
        }
    }
}

pub(crate) fn segmentation_error(frame: FrameRef<'_>, reason: &str) -> Error {
    Error::Segmentation {
        subject: String::from(frame.subject_id),
        frame: frame.frame_index,
        reason: String::from(reason),
    }
}
