//! Per-structure evaluation metrics: overlap, surface distances, volume,
//! exposed surface area and connected components.

mod components;
mod edt;
mod surface;

pub use components::{
    connected_components, keep_largest_component, label_components, ComponentMap, ComponentReport,
};
pub(crate) use edt::squared_edt;
pub use edt::{euclidean_distance_transform, DistanceField};
pub use surface::{
    assd, boundary_mask, extract_surface, hd95, mask_surface_distances, nearest_rank,
    surface_distances, SurfaceDistanceSet,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{LabelVolume, Mask, Structure};

/// Dice numerator and denominator terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapCounts {
    pub intersection: usize,
    pub size_a: usize,
    pub size_b: usize,
}

impl OverlapCounts {
    pub fn between(a: &Mask, b: &Mask) -> Result<Self> {
        if a.shape() != b.shape() {
            return Err(Error::GridMismatch);
        }
        let mut c = OverlapCounts {
            intersection: 0,
            size_a: 0,
            size_b: 0,
        };
        for (&x, &y) in a.as_slice().iter().zip(b.as_slice()) {
            c.size_a += x as usize;
            c.size_b += y as usize;
            c.intersection += (x && y) as usize;
        }
        Ok(c)
    }

    /// `None` when both sets are empty.
    pub fn dice(&self) -> Option<f64> {
        let denom = self.size_a + self.size_b;
        (denom > 0).then(|| 2.0 * self.intersection as f64 / denom as f64)
    }
}

/// Dice overlap of structure `s`; `Ok(None)` when it is absent from both.
pub fn dice(a: &LabelVolume, b: &LabelVolume, s: Structure) -> Result<Option<f64>> {
    if a.shape() != b.shape() {
        return Err(Error::GridMismatch);
    }
    let code = s.code();
    let mut c = OverlapCounts {
        intersection: 0,
        size_a: 0,
        size_b: 0,
    };
    for (&x, &y) in a.labels().iter().zip(b.labels()) {
        let (ia, ib) = (x == code, y == code);
        c.size_a += ia as usize;
        c.size_b += ib as usize;
        c.intersection += (ia && ib) as usize;
    }
    Ok(c.dice())
}

pub fn structure_volume_mm3(vol: &LabelVolume, s: Structure) -> f64 {
    vol.count(s) as f64 * vol.spacing().voxel_volume()
}

/// Exposed-face surface area: each face of a voxel of `s` whose neighbour is
/// another label or outside the grid contributes its area.
pub fn structure_surface_area_mm2(vol: &LabelVolume, s: Structure) -> f64 {
    let shape = vol.shape();
    let [nx, ny, nz] = shape.dims();
    let [dx, dy, dz] = vol.spacing().as_array();
    let l = vol.labels();
    let code = s.code();
    let (mut fx, mut fy, mut fz) = (0usize, 0usize, 0usize);
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let i = shape.index(x, y, z);
                if l[i] != code {
                    continue;
                }
                fx += (x == 0 || l[i - 1] != code) as usize;
                fx += (x + 1 == nx || l[i + 1] != code) as usize;
                fy += (y == 0 || l[i - nx] != code) as usize;
                fy += (y + 1 == ny || l[i + nx] != code) as usize;
                fz += (z == 0 || l[i - nx * ny] != code) as usize;
                fz += (z + 1 == nz || l[i + nx * ny] != code) as usize;
            }
        }
    }
    fx as f64 * dy * dz + fy as f64 * dx * dz + fz as f64 * dx * dy
}
