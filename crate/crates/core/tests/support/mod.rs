//! Brute-force reference implementations and random instance generators
//! shared by the oracle tests and the acceptance suite.

#![allow(dead_code)]

pub mod properties;

use cineseg_core::grid::{GridShape, LabelVolume, Mask, Spacing, Structure, NUM_CLASSES};
use cineseg_core::student::{combined_loss, softmax_rows, LossWeights};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_shape(r: &mut ChaCha8Rng, max: usize) -> GridShape {
    GridShape::new(
        r.random_range(1..=max),
        r.random_range(1..=max),
        r.random_range(1..=max),
    )
    .unwrap()
}

pub fn random_spacing(r: &mut ChaCha8Rng) -> Spacing {
    Spacing::new(
        r.random_range(0.5..2.5),
        r.random_range(0.5..2.5),
        r.random_range(0.5..2.5),
    )
    .unwrap()
}

/// A few random boxes and balls of random labels over sparse label noise.
pub fn random_labels(r: &mut ChaCha8Rng, shape: GridShape, spacing: Spacing) -> LabelVolume {
    let [nx, ny, nz] = shape.dims();
    let mut labels = vec![0u8; shape.len()];
    let noise = r.random_range(0.0..0.15);
    for v in labels.iter_mut() {
        if r.random_bool(noise) {
            *v = r.random_range(1..NUM_CLASSES as u8);
        }
    }
    for _ in 0..r.random_range(0..6) {
        let code = r.random_range(1..4u8);
        let c = [
            r.random_range(0..nx),
            r.random_range(0..ny),
            r.random_range(0..nz),
        ];
        let rad = r.random_range(0.5..4.0);
        let ball = r.random_bool(0.5);
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    let d = [x.abs_diff(c[0]), y.abs_diff(c[1]), z.abs_diff(c[2])];
                    let inside = if ball {
                        d.iter().map(|&v| (v * v) as f64).sum::<f64>() <= rad * rad
                    } else {
                        d.iter().all(|&v| v as f64 <= rad)
                    };
                    if inside {
                        labels[shape.index(x, y, z)] = code;
                    }
                }
            }
        }
    }
    LabelVolume::new(shape, spacing, labels).unwrap()
}

pub fn random_mask(r: &mut ChaCha8Rng, shape: GridShape) -> Mask {
    let p = r.random_range(0.0..0.3);
    Mask::from_fn(shape, |_, _, _| r.random_bool(p))
}

fn coords(shape: GridShape) -> impl Iterator<Item = [usize; 3]> {
    let [nx, ny, nz] = shape.dims();
    (0..nz).flat_map(move |z| (0..ny).flat_map(move |y| (0..nx).map(move |x| [x, y, z])))
}

fn has(vol: &LabelVolume, s: Structure, p: [i64; 3]) -> bool {
    let [nx, ny, nz] = vol.shape().dims();
    if p[0] < 0
        || p[1] < 0
        || p[2] < 0
        || p[0] >= nx as i64
        || p[1] >= ny as i64
        || p[2] >= nz as i64
    {
        return false;
    }
    vol.get(p[0] as usize, p[1] as usize, p[2] as usize) == s
}

pub fn brute_dice(a: &LabelVolume, b: &LabelVolume, s: Structure) -> Option<f64> {
    let mut inter = 0usize;
    let mut na = 0usize;
    let mut nb = 0usize;
    for p in coords(a.shape()) {
        let (x, y, z) = (p[0], p[1], p[2]);
        let ia = a.get(x, y, z) == s;
        let ib = b.get(x, y, z) == s;
        na += ia as usize;
        nb += ib as usize;
        inter += (ia && ib) as usize;
    }
    (na + nb > 0).then(|| 2.0 * inter as f64 / (na + nb) as f64)
}

/// Voxels of `s` with a face neighbour that is not `s` (or off the grid).
pub fn brute_surface(vol: &LabelVolume, s: Structure) -> Vec<[usize; 3]> {
    const FACES: [[i64; 3]; 6] = [
        [1, 0, 0],
        [-1, 0, 0],
        [0, 1, 0],
        [0, -1, 0],
        [0, 0, 1],
        [0, 0, -1],
    ];
    coords(vol.shape())
        .filter(|p| vol.get(p[0], p[1], p[2]) == s)
        .filter(|p| {
            FACES.iter().any(|d| {
                let q = [p[0] as i64 + d[0], p[1] as i64 + d[1], p[2] as i64 + d[2]];
                !has(vol, s, q)
            })
        })
        .collect()
}

pub fn dist(p: [usize; 3], q: [usize; 3], sp: Spacing) -> f64 {
    let a = sp.as_array();
    (0..3)
        .map(|k| {
            let d = (p[k] as f64 - q[k] as f64) * a[k];
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

fn directed(from: &[[usize; 3]], to: &[[usize; 3]], sp: Spacing) -> Vec<f64> {
    from.iter()
        .map(|&p| {
            to.iter()
                .map(|&q| dist(p, q, sp))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// All-pairs directed surface distances `(a -> b, b -> a)`; `None` if either
/// surface is empty.
pub fn brute_surface_distances(
    a: &LabelVolume,
    b: &LabelVolume,
    s: Structure,
) -> Option<(Vec<f64>, Vec<f64>)> {
    let sa = brute_surface(a, s);
    let sb = brute_surface(b, s);
    if sa.is_empty() || sb.is_empty() {
        return None;
    }
    let sp = a.spacing();
    Some((directed(&sa, &sb, sp), directed(&sb, &sa, sp)))
}

pub fn brute_hd95(ab: &[f64], ba: &[f64]) -> f64 {
    let mut all: Vec<f64> = ab.iter().chain(ba).copied().collect();
    all.sort_by(f64::total_cmp);
    let rank = (95 * all.len()).div_ceil(100);
    all[rank - 1]
}

pub fn brute_assd(ab: &[f64], ba: &[f64]) -> f64 {
    (ab.iter().sum::<f64>() + ba.iter().sum::<f64>()) / (ab.len() + ba.len()) as f64
}

/// Distance from every voxel to the nearest foreground voxel by full scan.
pub fn brute_edt(mask: &Mask, sp: Spacing) -> Vec<f64> {
    let fg: Vec<[usize; 3]> = coords(mask.shape())
        .filter(|p| mask.get(p[0], p[1], p[2]))
        .collect();
    coords(mask.shape())
        .map(|p| {
            fg.iter()
                .map(|&q| dist(p, q, sp))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Largest relative deviation between the analytic logit gradient and central
/// differences of the loss.
pub fn gradient_check(logits: &[f64], target: &[u8], weights: LossWeights, h: f64) -> f64 {
    let loss_at = |z: &[f64]| {
        combined_loss(&softmax_rows(z), target, weights)
            .unwrap()
            .loss
    };
    let analytic = combined_loss(&softmax_rows(logits), target, weights)
        .unwrap()
        .grad_logits;
    let mut z = logits.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..z.len() {
        let orig = z[i];
        z[i] = orig + h;
        let up = loss_at(&z);
        z[i] = orig - h;
        let down = loss_at(&z);
        z[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        let scale = analytic[i].abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((analytic[i] - numeric).abs() / scale);
    }
    worst
}

pub fn random_loss_instance(r: &mut ChaCha8Rng, voxels: usize) -> (Vec<f64>, Vec<u8>) {
    let logits = (0..voxels * NUM_CLASSES)
        .map(|_| r.random_range(-3.0..3.0))
        .collect();
    let target = (0..voxels)
        .map(|_| r.random_range(0..NUM_CLASSES as u8))
        .collect();
    (logits, target)
}
