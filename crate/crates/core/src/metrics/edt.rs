//! Exact Euclidean distance transform.
//!
//! Separable lower-envelope-of-parabolas transform (one pass per axis over
//! squared distances). Anisotropic spacing is folded into each axis pass, so
//! the result is the exact center-to-center distance in millimetres.

use alloc::vec;
use alloc::vec::Vec;

use crate::grid::{GridShape, Mask, Spacing};

/// Per-voxel distance (mm) to the nearest foreground voxel.
///
/// Every value is `f64::INFINITY` when the mask has no foreground.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    shape: GridShape,
    values: Vec<f64>,
}

impl DistanceField {
    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.values[self.shape.index(x, y, z)]
    }
}

pub fn euclidean_distance_transform(mask: &Mask, spacing: Spacing) -> DistanceField {
    let shape = mask.shape();
    let mut values = squared_edt(mask.as_slice(), shape.dims(), spacing);
    for v in &mut values {
        *v = libm::sqrt(*v);
    }
    DistanceField { shape, values }
}

/// Squared distances for a dense row-major boolean grid of `dims`.
pub(crate) fn squared_edt(mask: &[bool], dims: [usize; 3], spacing: Spacing) -> Vec<f64> {
    debug_assert_eq!(mask.len(), dims[0] * dims[1] * dims[2]);
    let mut f: Vec<f64> = mask
        .iter()
        .map(|&b| if b { 0.0 } else { f64::INFINITY })
        .collect();
    let [nx, ny, nz] = dims;
    let steps = [1, nx, nx * ny];
    let h = spacing.as_array();
    let longest = nx.max(ny).max(nz);
    let mut scratch = Envelope::with_capacity(longest);
    let mut line = vec![0.0; longest];
    let mut out = vec![0.0; longest];

    for axis in 0..3 {
        let n = dims[axis];
        if n == 1 {
            continue;
        }
        let stride = steps[axis];
        // Enumerate line start offsets: every voxel whose coordinate on `axis` is 0.
        let (outer_a, outer_b, step_a, step_b) = match axis {
            0 => (ny, nz, nx, nx * ny),
            1 => (nx, nz, 1, nx * ny),
            _ => (nx, ny, 1, nx),
        };
        for b in 0..outer_b {
            for a in 0..outer_a {
                let start = a * step_a + b * step_b;
                for (i, slot) in line[..n].iter_mut().enumerate() {
                    *slot = f[start + i * stride];
                }
                scratch.transform(&line[..n], h[axis], &mut out[..n]);
                for (i, &v) in out[..n].iter().enumerate() {
                    f[start + i * stride] = v;
                }
            }
        }
    }
    f
}

/// Scratch buffers for the 1D lower-envelope transform.
struct Envelope {
    sites: Vec<usize>,
    bounds: Vec<f64>,
}

impl Envelope {
    fn with_capacity(n: usize) -> Self {
        Self {
            sites: Vec::with_capacity(n),
            bounds: Vec::with_capacity(n + 1),
        }
    }

    /// `out[q] = min_p (h (q - p))^2 + f[p]` over finite `f[p]`.
    fn transform(&mut self, f: &[f64], h: f64, out: &mut [f64]) {
        let n = f.len();
        self.sites.clear();
        self.bounds.clear();
        let pos = |i: usize| i as f64 * h;
        // Intersection abscissa of the parabolas rooted at sites p < q.
        let meet = |p: usize, q: usize| {
            let (xp, xq) = (pos(p), pos(q));
            ((f[q] + xq * xq) - (f[p] + xp * xp)) / (2.0 * (xq - xp))
        };

        for q in (0..n).filter(|&q| f[q].is_finite()) {
            loop {
                let Some(&p) = self.sites.last() else {
                    self.sites.push(q);
                    self.bounds.push(f64::NEG_INFINITY);
                    break;
                };
                let s = meet(p, q);
                if s <= *self.bounds.last().unwrap() {
                    self.sites.pop();
                    self.bounds.pop();
                } else {
                    self.sites.push(q);
                    self.bounds.push(s);
                    break;
                }
            }
        }

        if self.sites.is_empty() {
            out.fill(f64::INFINITY);
            return;
        }

        let mut k = 0;
        for (q, slot) in out.iter_mut().enumerate() {
            let xq = pos(q);
            while k + 1 < self.sites.len() && self.bounds[k + 1] < xq {
                k += 1;
            }
            let p = self.sites[k];
            let d = xq - pos(p);
            *slot = d * d + f[p];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_mask_is_zero() {
        let shape = GridShape::new(3, 4, 2).unwrap();
        let dt = euclidean_distance_transform(&Mask::full(shape), Spacing::unit());
        assert!(dt.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_mask_is_infinite() {
        let shape = GridShape::new(3, 3, 3).unwrap();
        let dt = euclidean_distance_transform(&Mask::empty(shape), Spacing::unit());
        assert!(dt.values().iter().all(|v| v.is_infinite()));
    }

    #[test]
    fn line_distances() {
        let shape = GridShape::new(5, 1, 1).unwrap();
        let m = Mask::from_fn(shape, |x, _, _| x == 0);
        let dt = euclidean_distance_transform(&m, Spacing::unit());
        assert_eq!(dt.values(), &[0.0, 1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn anisotropic_diagonal() {
        let shape = GridShape::new(2, 2, 2).unwrap();
        let m = Mask::from_fn(shape, |x, y, z| (x, y, z) == (0, 0, 0));
        let dt = euclidean_distance_transform(&m, Spacing::new(0.5, 2.0, 3.0).unwrap());
        let expect = libm::sqrt(0.25 + 4.0 + 9.0);
        assert!((dt.get(1, 1, 1) - expect).abs() < 1e-12);
        assert_eq!(dt.get(0, 1, 0), 2.0);
        assert_eq!(dt.get(0, 0, 1), 3.0);
    }
}
