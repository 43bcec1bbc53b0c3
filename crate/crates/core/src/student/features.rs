//! Per-voxel hand-crafted features.
//!
//! Layout of a feature row: normalised intensity, Gaussian-smoothed intensity
//! at sigma 1, 2 and 4 voxels, gradient magnitude of the sigma-1 image,
//! normalised coordinates `x/nx`, `y/ny`, `z/nz`, and a constant bias.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridShape, ScalarVolume};

pub const NUM_FEATURES: usize = 9;
pub const SMOOTHING_SCALES: [f64; 3] = [1.0, 2.0, 4.0];

/// Affine map of the training set's intensity range onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntensityNormalization {
    pub min: f64,
    pub max: f64,
}

impl IntensityNormalization {
    pub fn fit<'a>(frames: impl IntoIterator<Item = &'a ScalarVolume>) -> Self {
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for f in frames {
            for &v in f.values() {
                min = min.min(f64::from(v));
                max = max.max(f64::from(v));
            }
        }
        Self { min, max }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min.is_finite() && self.max.is_finite() && self.max >= self.min {
            Ok(())
        } else {
            Err(Error::InvalidConfig(alloc::format!(
                "invalid intensity normalisation [{}, {}]",
                self.min,
                self.max
            )))
        }
    }

    #[inline]
    pub fn apply(&self, v: f64) -> f64 {
        let span = self.max - self.min;
        if span > 0.0 {
            (v - self.min) / span
        } else {
            v - self.min
        }
    }
}

/// Dense feature channels of one frame. Coordinates and bias are derived
/// from the voxel index on demand.
#[derive(Debug, Clone)]
pub struct FeatureField {
    shape: GridShape,
    /// raw, smooth(1), smooth(2), smooth(4), gradient magnitude
    channels: [Vec<f64>; 5],
}

impl FeatureField {
    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn channel(&self, k: usize) -> &[f64] {
        &self.channels[k]
    }

    #[inline]
    pub fn row(&self, i: usize) -> [f64; NUM_FEATURES] {
        let (x, y, z) = self.shape.delinearize(i);
        let [nx, ny, nz] = self.shape.dims();
        [
            self.channels[0][i],
            self.channels[1][i],
            self.channels[2][i],
            self.channels[3][i],
            self.channels[4][i],
            x as f64 / nx as f64,
            y as f64 / ny as f64,
            z as f64 / nz as f64,
            1.0,
        ]
    }
}

pub fn extract_features(frame: &ScalarVolume, norm: &IntensityNormalization) -> FeatureField {
    let shape = frame.shape();
    let raw: Vec<f64> = frame
        .values()
        .iter()
        .map(|&v| norm.apply(f64::from(v)))
        .collect();
    let s1 = gaussian_smooth(&raw, shape, SMOOTHING_SCALES[0]);
    let s2 = gaussian_smooth(&raw, shape, SMOOTHING_SCALES[1]);
    let s4 = gaussian_smooth(&raw, shape, SMOOTHING_SCALES[2]);
    let grad = gradient_magnitude(&s1, shape);
    FeatureField {
        shape,
        channels: [raw, s1, s2, s4, grad],
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = libm::ceil(3.0 * sigma) as usize;
    let mut k: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - radius as f64;
            libm::exp(-d * d / (2.0 * sigma * sigma))
        })
        .collect();
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    k
}

/// Separable Gaussian blur truncated at 3 sigma. Near the border the kernel is
/// renormalised over the taps that fall inside the grid.
pub fn gaussian_smooth(values: &[f64], shape: GridShape, sigma: f64) -> Vec<f64> {
    let kernel = gaussian_kernel(sigma);
    let radius = kernel.len() / 2;
    let dims = shape.dims();
    let strides = [1, dims[0], dims[0] * dims[1]];
    let mut cur = values.to_vec();
    let mut next = vec![0.0; values.len()];
    for axis in 0..3 {
        let n = dims[axis];
        if n == 1 {
            continue;
        }
        let stride = strides[axis];
        for (i, out) in next.iter_mut().enumerate() {
            let pos = (i / stride) % n;
            let base = i - pos * stride;
            let lo = pos.saturating_sub(radius);
            let hi = (pos + radius).min(n - 1);
            let (mut acc, mut weight) = (0.0, 0.0);
            for q in lo..=hi {
                let w = kernel[q + radius - pos];
                acc += w * cur[base + q * stride];
                weight += w;
            }
            *out = acc / weight;
        }
        core::mem::swap(&mut cur, &mut next);
    }
    cur
}

/// Central differences (one-sided at the border), voxel units.
pub fn gradient_magnitude(values: &[f64], shape: GridShape) -> Vec<f64> {
    let dims = shape.dims();
    let strides = [1, dims[0], dims[0] * dims[1]];
    (0..values.len())
        .map(|i| {
            let mut sq = 0.0;
            for axis in 0..3 {
                let n = dims[axis];
                if n == 1 {
                    continue;
                }
                let s = strides[axis];
                let pos = (i / s) % n;
                let g = if pos == 0 {
                    values[i + s] - values[i]
                } else if pos + 1 == n {
                    values[i] - values[i - s]
                } else {
                    (values[i + s] - values[i - s]) / 2.0
                };
                sq += g * g;
            }
            libm::sqrt(sq)
        })
        .collect()
}
