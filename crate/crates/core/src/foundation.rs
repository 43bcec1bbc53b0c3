//! Simulated foundation segmenter.
//!
//! Each frame is corrupted independently from its own random substream, which
//! is what makes the output temporally inconsistent. Corruption steps, in
//! order, for every structure: random ball dilation or erosion, random
//! spherical dropout; then, on the composed map, spurious disconnected blobs
//! and boundary patches swapped to a touching structure.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CineStudy, Frame, LabelVolume, Mask, Structure};
use crate::morphology::{dilate, erode};
use crate::rng::{frame_key, substream, Rng};
use crate::segmenter::{segmentation_error, FrameRef, SegmenterModel};

/// Chebyshev clearance (voxels) between a spurious blob and any labelled
/// voxel. Anything above 1 keeps the blob out of every 26-neighbourhood.
pub const BLOB_CLEARANCE: usize = 3;
const BLOB_ATTEMPTS: usize = 256;
const SWAP_RADIUS: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorruptionConfig {
    pub seed: u64,
    /// Standard deviation of the dilation/erosion radius.
    pub boundary_sigma_mm: f64,
    pub dropout_rate: f64,
    pub blob_rate: f64,
    pub swap_rate: f64,
}

impl Default for CorruptionConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            boundary_sigma_mm: 1.0,
            dropout_rate: 0.1,
            blob_rate: 0.15,
            swap_rate: 0.1,
        }
    }
}

impl CorruptionConfig {
    /// Zero corruption: output equals input.
    pub fn identity() -> Self {
        Self {
            seed: 0,
            boundary_sigma_mm: 0.0,
            dropout_rate: 0.0,
            blob_rate: 0.0,
            swap_rate: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let rate = |r: f64| (0.0..=1.0).contains(&r);
        if !(rate(self.dropout_rate) && rate(self.blob_rate) && rate(self.swap_rate)) {
            return Err(Error::InvalidConfig(String::from(
                "corruption rates must lie in [0, 1]",
            )));
        }
        if !(self.boundary_sigma_mm.is_finite() && self.boundary_sigma_mm >= 0.0) {
            return Err(Error::InvalidConfig(String::from(
                "boundary_sigma_mm must be finite and non-negative",
            )));
        }
        Ok(())
    }
}

/// Corrupts one ground-truth frame. `stream_key` selects the random substream;
/// [`frame_key`] derives it from subject and frame index.
pub fn corrupt(truth: &LabelVolume, stream_key: u64, cfg: &CorruptionConfig) -> LabelVolume {
    let mut rng = substream(cfg.seed, stream_key);
    let spacing = truth.spacing();
    let h = spacing.min_component();

    let mut masks: Vec<Mask> = Vec::with_capacity(7);
    for s in Structure::FOREGROUND {
        let mut m = truth.foreground_mask(s);
        if cfg.boundary_sigma_mm > 0.0 {
            let normal = Normal::new(0.0, cfg.boundary_sigma_mm).expect("validated");
            let r_mm: f64 = normal.sample(&mut rng);
            let grow = rng.random_bool(0.5);
            let steps = libm::round(libm::fabs(r_mm) / h);
            if steps > 0.0 && !m.is_empty() {
                let r = steps * h;
                m = if grow {
                    dilate(&m, r, spacing)
                } else {
                    erode(&m, r, spacing)
                };
            }
        }
        if rng.random::<f64>() < cfg.dropout_rate {
            drop_sphere(&mut m, &mut rng);
        }
        masks.push(m);
    }

    // Compose lowest precedence first so higher-precedence structures win.
    let mut out = LabelVolume::background(truth.shape(), spacing);
    for (s, m) in Structure::FOREGROUND.iter().zip(&masks).rev() {
        for (i, _) in m.as_slice().iter().enumerate().filter(|(_, &b)| b) {
            out.set(i, *s);
        }
    }

    for s in Structure::FOREGROUND {
        if rng.random::<f64>() < cfg.blob_rate {
            insert_blob(&mut out, s, &mut rng);
        }
    }
    for s in Structure::FOREGROUND {
        if rng.random::<f64>() < cfg.swap_rate {
            swap_patch(&mut out, s, &mut rng);
        }
    }
    out
}

fn nth_set(mask: &Mask, n: usize) -> usize {
    mask.as_slice()
        .iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .nth(n)
        .map(|(i, _)| i)
        .expect("n < count")
}

/// Removes a random sphere centred on a voxel of the structure.
fn drop_sphere(mask: &mut Mask, rng: &mut Rng) {
    let n = mask.count();
    if n == 0 {
        return;
    }
    let shape = mask.shape();
    let centre = shape.delinearize(nth_set(mask, rng.random_range(0..n)));
    let equivalent = libm::cbrt(3.0 * n as f64 / (4.0 * core::f64::consts::PI));
    let r = rng.random_range(2.0..=(0.6 * equivalent).max(2.5));
    for_each_in_ball(shape.dims(), centre, r, |x, y, z| {
        mask.as_mut_slice()[shape.index(x, y, z)] = false;
    });
}

/// Adds a small ball of `s` in empty space, clear of every labelled voxel.
fn insert_blob(vol: &mut LabelVolume, s: Structure, rng: &mut Rng) {
    let shape = vol.shape();
    let dims = shape.dims();
    let radius: f64 = [1.5, 2.0, 2.5][rng.random_range(0..3)];
    let reach = libm::floor(radius) as usize + BLOB_CLEARANCE + 1;
    if dims.iter().any(|&n| n <= 2 * reach) {
        return;
    }
    for _ in 0..BLOB_ATTEMPTS {
        let c: [usize; 3] = core::array::from_fn(|k| rng.random_range(reach..dims[k] - reach));
        let clear = (c[2] - reach..=c[2] + reach).all(|z| {
            (c[1] - reach..=c[1] + reach).all(|y| {
                let row = shape.index(c[0] - reach, y, z);
                vol.labels()[row..=row + 2 * reach].iter().all(|&l| l == 0)
            })
        });
        if clear {
            for_each_in_ball(dims, (c[0], c[1], c[2]), radius, |x, y, z| {
                vol.set(shape.index(x, y, z), s);
            });
            return;
        }
    }
}

/// Relabels a ball of `s` voxels around a random interface voxel to the
/// neighbouring structure's label.
fn swap_patch(vol: &mut LabelVolume, s: Structure, rng: &mut Rng) {
    let shape = vol.shape();
    let [nx, ny, nz] = shape.dims();
    let code = s.code();
    let l = vol.labels();
    let mut candidates: Vec<(usize, u8)> = Vec::new();
    for (i, &c) in l.iter().enumerate() {
        if c != code {
            continue;
        }
        let (x, y, z) = shape.delinearize(i);
        let neighbours = [
            (x > 0).then(|| i - 1),
            (x + 1 < nx).then(|| i + 1),
            (y > 0).then(|| i - nx),
            (y + 1 < ny).then(|| i + nx),
            (z > 0).then(|| i - nx * ny),
            (z + 1 < nz).then(|| i + nx * ny),
        ];
        if let Some(other) = neighbours
            .into_iter()
            .flatten()
            .map(|j| l[j])
            .find(|&o| o != 0 && o != code)
        {
            candidates.push((i, other));
        }
    }
    if candidates.is_empty() {
        return;
    }
    let (centre, other) = candidates[rng.random_range(0..candidates.len())];
    let other = Structure::ALL[other as usize];
    for_each_in_ball(
        shape.dims(),
        shape.delinearize(centre),
        SWAP_RADIUS,
        |x, y, z| {
            let i = shape.index(x, y, z);
            if vol.labels()[i] == code {
                vol.set(i, other);
            }
        },
    );
}

/// Visits in-grid voxels within `r` voxel units of `c`.
fn for_each_in_ball(
    dims: [usize; 3],
    c: (usize, usize, usize),
    r: f64,
    mut f: impl FnMut(usize, usize, usize),
) {
    let reach = libm::floor(r) as usize;
    let lo = |v: usize| v.saturating_sub(reach);
    let hi = |v: usize, n: usize| (v + reach).min(n - 1);
    for z in lo(c.2)..=hi(c.2, dims[2]) {
        for y in lo(c.1)..=hi(c.1, dims[1]) {
            for x in lo(c.0)..=hi(c.0, dims[0]) {
                let d = |a: usize, b: usize| (a as f64 - b as f64) * (a as f64 - b as f64);
                if d(x, c.0) + d(y, c.1) + d(z, c.2) <= r * r {
                    f(x, y, z);
                }
            }
        }
    }
}

/// Replaces every frame's labels with a corrupted copy of them.
///
/// The input study must carry ground truth; it is left untouched.
pub fn simulate_foundation(study: &CineStudy, cfg: &CorruptionConfig) -> Result<CineStudy> {
    let frames = study
        .frames()
        .iter()
        .enumerate()
        .map(|(t, f)| Frame {
            image: f.image.clone(),
            labels: corrupt(&f.labels, frame_key(study.subject_id(), t), cfg),
        })
        .collect();
    CineStudy::new(study.subject_id(), frames, study.is_manual())
}

/// [`SegmenterModel`] that plays the foundation model: it looks up the ground
/// truth of the requested frame and corrupts it. Ground truth never leaves
/// this type.
#[derive(Debug, Clone)]
pub struct FoundationSim {
    cfg: CorruptionConfig,
    truth: BTreeMap<String, Vec<LabelVolume>>,
}

impl FoundationSim {
    pub fn new(cfg: CorruptionConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            truth: BTreeMap::new(),
        })
    }

    pub fn insert_truth(&mut self, subject_id: impl Into<String>, frames: Vec<LabelVolume>) {
        self.truth.insert(subject_id.into(), frames);
    }

    pub fn config(&self) -> &CorruptionConfig {
        &self.cfg
    }
}

impl SegmenterModel for FoundationSim {
    fn predict(&self, frame: FrameRef<'_>) -> Result<LabelVolume> {
        let truth = self
            .truth
            .get(frame.subject_id)
            .and_then(|f| f.get(frame.frame_index))
            .ok_or_else(|| {
                segmentation_error(frame, "no ground truth registered for this frame")
            })?;
        if truth.shape() != frame.image.shape() {
            return Err(segmentation_error(
                frame,
                "ground truth is on a different grid",
            ));
        }
        Ok(corrupt(
            truth,
            frame_key(frame.subject_id, frame.frame_index),
            &self.cfg,
        ))
    }
}
