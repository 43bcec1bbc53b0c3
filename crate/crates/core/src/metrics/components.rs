//! 26-connected component labelling.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::grid::{LabelVolume, Mask, Structure};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentReport {
    pub component_count: usize,
    /// Voxel counts, largest first.
    pub component_sizes: Vec<usize>,
}

/// Per-voxel component ids (`0` = not in the mask, components numbered from
/// `1` in order of their smallest linear index).
#[derive(Debug, Clone)]
pub struct ComponentMap {
    pub ids: Vec<u32>,
    /// `sizes[k]` is the size of component `k + 1`.
    pub sizes: Vec<usize>,
}

impl ComponentMap {
    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    /// Id of the largest component; ties go to the lowest id.
    pub fn largest(&self) -> Option<u32> {
        let mut best: Option<(usize, usize)> = None;
        for (k, &size) in self.sizes.iter().enumerate() {
            if best.is_none_or(|(_, s)| size > s) {
                best = Some((k, size));
            }
        }
        best.map(|(k, _)| k as u32 + 1)
    }
}

pub fn label_components(mask: &Mask) -> ComponentMap {
    let shape = mask.shape();
    let [nx, ny, nz] = shape.dims();
    let m = mask.as_slice();
    let mut ids = vec![0u32; m.len()];
    let mut sizes = Vec::new();
    let mut stack = Vec::new();

    for seed in 0..m.len() {
        if !m[seed] || ids[seed] != 0 {
            continue;
        }
        let id = sizes.len() as u32 + 1;
        let mut size = 0;
        ids[seed] = id;
        stack.push(seed);
        while let Some(i) = stack.pop() {
            size += 1;
            let (x, y, z) = shape.delinearize(i);
            for z2 in z.saturating_sub(1)..=(z + 1).min(nz - 1) {
                for y2 in y.saturating_sub(1)..=(y + 1).min(ny - 1) {
                    for x2 in x.saturating_sub(1)..=(x + 1).min(nx - 1) {
                        let j = shape.index(x2, y2, z2);
                        if m[j] && ids[j] == 0 {
                            ids[j] = id;
                            stack.push(j);
                        }
                    }
                }
            }
        }
        sizes.push(size);
    }
    ComponentMap { ids, sizes }
}

pub fn connected_components(vol: &LabelVolume, s: Structure) -> ComponentReport {
    let map = label_components(&vol.foreground_mask(s));
    let mut component_sizes = map.sizes;
    component_sizes.sort_unstable_by(|a, b| b.cmp(a));
    ComponentReport {
        component_count: component_sizes.len(),
        component_sizes,
    }
}

/// Relabels every voxel of `s` outside its largest component to background.
pub fn keep_largest_component(vol: &LabelVolume, s: Structure) -> LabelVolume {
    let map = label_components(&vol.foreground_mask(s));
    let mut out = vol.clone();
    if map.count() <= 1 {
        return out;
    }
    let keep = map.largest().expect("at least two components");
    for (i, &id) in map.ids.iter().enumerate() {
        if id != 0 && id != keep {
            out.set(i, Structure::Background);
        }
    }
    out
}
