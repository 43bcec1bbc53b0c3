//! Boundary extraction and surface-distance metrics (HD95, ASSD).

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::edt::squared_edt;
use crate::error::{Error, Result};
use crate::grid::{GridShape, LabelVolume, Mask, Spacing, Structure};

/// Foreground voxels with at least one 6-neighbour that is background or
/// outside the grid.
pub fn boundary_mask(mask: &Mask) -> Mask {
    let shape = mask.shape();
    let [nx, ny, nz] = shape.dims();
    let m = mask.as_slice();
    Mask::from_fn(shape, |x, y, z| {
        let i = shape.index(x, y, z);
        if !m[i] {
            return false;
        }
        x == 0
            || y == 0
            || z == 0
            || x + 1 == nx
            || y + 1 == ny
            || z + 1 == nz
            || !m[i - 1]
            || !m[i + 1]
            || !m[i - nx]
            || !m[i + nx]
            || !m[i - nx * ny]
            || !m[i + nx * ny]
    })
}

/// Boundary voxel coordinates in linear-index order.
pub fn extract_surface(mask: &Mask) -> Vec<[usize; 3]> {
    let shape = mask.shape();
    boundary_mask(mask)
        .as_slice()
        .iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .map(|(i, _)| {
            let (x, y, z) = shape.delinearize(i);
            [x, y, z]
        })
        .collect()
}

/// Directed nearest-surface distances in both directions, in mm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceDistanceSet {
    pub distances_a_to_b: Vec<f64>,
    pub distances_b_to_a: Vec<f64>,
}

impl SurfaceDistanceSet {
    /// Both directed lists concatenated, `a_to_b` first.
    pub fn pooled(&self) -> impl Iterator<Item = f64> + '_ {
        self.distances_a_to_b
            .iter()
            .chain(self.distances_b_to_a.iter())
            .copied()
    }

    pub fn len(&self) -> usize {
        self.distances_a_to_b.len() + self.distances_b_to_a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Surface distances between structure `s` in `a` and in `b`.
///
/// `Ok(None)` marks the undefined case where either surface is empty.
pub fn surface_distances(
    a: &LabelVolume,
    b: &LabelVolume,
    s: Structure,
) -> Result<Option<SurfaceDistanceSet>> {
    if !a.same_grid(b) {
        return Err(Error::GridMismatch);
    }
    let sa = boundary_mask(&a.foreground_mask(s));
    let sb = boundary_mask(&b.foreground_mask(s));
    Ok(mask_surface_distances(&sa, &sb, a.spacing()))
}

/// Distances between two precomputed surface point sets on one grid.
pub fn mask_surface_distances(
    surface_a: &Mask,
    surface_b: &Mask,
    spacing: Spacing,
) -> Option<SurfaceDistanceSet> {
    let (lo_a, hi_a) = surface_a.bounding_box()?;
    let (lo_b, hi_b) = surface_b.bounding_box()?;
    let lo: [usize; 3] = core::array::from_fn(|k| lo_a[k].min(lo_b[k]));
    let hi: [usize; 3] = core::array::from_fn(|k| hi_a[k].max(hi_b[k]));
    let crop = Crop::new(surface_a.shape(), lo, hi);
    Some(SurfaceDistanceSet {
        distances_a_to_b: crop.directed(surface_a, surface_b, spacing),
        distances_b_to_a: crop.directed(surface_b, surface_a, spacing),
    })
}

/// Sub-box of a grid that holds every point of both surfaces. The transform
/// restricted to it is still exact, because all sites and queries lie inside.
struct Crop {
    shape: GridShape,
    lo: [usize; 3],
    dims: [usize; 3],
}

impl Crop {
    fn new(shape: GridShape, lo: [usize; 3], hi: [usize; 3]) -> Self {
        Self {
            shape,
            lo,
            dims: core::array::from_fn(|k| hi[k] - lo[k] + 1),
        }
    }

    fn extract(&self, mask: &Mask) -> Vec<bool> {
        let [cx, cy, cz] = self.dims;
        let m = mask.as_slice();
        let mut out = Vec::with_capacity(cx * cy * cz);
        for z in 0..cz {
            for y in 0..cy {
                let row = self.shape.index(self.lo[0], self.lo[1] + y, self.lo[2] + z);
                out.extend_from_slice(&m[row..row + cx]);
            }
        }
        out
    }

    fn directed(&self, from: &Mask, to: &Mask, spacing: Spacing) -> Vec<f64> {
        let sq = squared_edt(&self.extract(to), self.dims, spacing);
        self.extract(from)
            .iter()
            .zip(sq.iter())
            .filter(|(&f, _)| f)
            .map(|(_, &d)| libm::sqrt(d))
            .collect()
    }
}

/// 95th percentile of the pooled distances, nearest-rank method.
pub fn hd95(sd: &SurfaceDistanceSet) -> f64 {
    let mut pooled: Vec<f64> = sd.pooled().collect();
    nearest_rank(&mut pooled, 95)
}

/// Mean of the pooled distances.
pub fn assd(sd: &SurfaceDistanceSet) -> f64 {
    let n = sd.len();
    if n == 0 {
        return f64::NAN;
    }
    sd.pooled().sum::<f64>() / n as f64
}

/// `ceil(pct/100 * n)`-th smallest value (1-indexed); integer arithmetic keeps
/// the rank exact.
pub fn nearest_rank(values: &mut [f64], pct: usize) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let rank = (pct * n).div_ceil(100).max(1);
    values[rank - 1]
}
