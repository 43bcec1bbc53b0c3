//! Ball dilation and erosion via the exact distance transform.

use alloc::vec::Vec;

use crate::grid::{GridShape, Mask, Spacing};
use crate::metrics::squared_edt;

/// Voxels within `radius_mm` of the mask (centre to centre).
pub fn dilate(mask: &Mask, radius_mm: f64, spacing: Spacing) -> Mask {
    let Some((lo, hi)) = mask.bounding_box() else {
        return mask.clone();
    };
    let shape = mask.shape();
    let margin = spacing
        .as_array()
        .map(|h| libm::ceil(radius_mm / h) as usize);
    let window = Window::around(shape, lo, hi, margin);
    let sq = squared_edt(&window.extract(mask), window.dims, spacing);
    let limit = radius_mm * radius_mm * (1.0 + 1e-12);
    let mut out = mask.clone();
    window.write_back(&mut out, |i| sq[i] <= limit);
    out
}

/// Mask voxels farther than `radius_mm` from every in-grid non-mask voxel.
pub fn erode(mask: &Mask, radius_mm: f64, spacing: Spacing) -> Mask {
    let Some((lo, hi)) = mask.bounding_box() else {
        return mask.clone();
    };
    let shape = mask.shape();
    // One ring of complement voxels around the box suffices: any complement
    // voxel beyond it projects onto a closer ring voxel.
    let window = Window::around(shape, lo, hi, [1, 1, 1]);
    let inner = window.extract(mask);
    let complement: Vec<bool> = inner.iter().map(|&b| !b).collect();
    let mut out = Mask::empty(shape);
    if !complement.iter().any(|&b| b) {
        // Mask fills the whole grid: nothing to erode against.
        return mask.clone();
    }
    let sq = squared_edt(&complement, window.dims, spacing);
    let limit = radius_mm * radius_mm * (1.0 + 1e-12);
    window.write_back(&mut out, |i| inner[i] && sq[i] > limit);
    out
}

struct Window {
    shape: GridShape,
    lo: [usize; 3],
    dims: [usize; 3],
}

impl Window {
    fn around(shape: GridShape, lo: [usize; 3], hi: [usize; 3], margin: [usize; 3]) -> Self {
        let n = shape.dims();
        let lo: [usize; 3] = core::array::from_fn(|k| lo[k].saturating_sub(margin[k]));
        let hi: [usize; 3] = core::array::from_fn(|k| (hi[k] + margin[k]).min(n[k] - 1));
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

    fn write_back(&self, out: &mut Mask, keep: impl Fn(usize) -> bool) {
        let [cx, cy, cz] = self.dims;
        let data = out.as_mut_slice();
        let mut i = 0;
        for z in 0..cz {
            for y in 0..cy {
                let row = self.shape.index(self.lo[0], self.lo[1] + y, self.lo[2] + z);
                for x in 0..cx {
                    data[row + x] = keep(i);
                    i += 1;
                }
            }
        }
    }
}
