//! Builders shared by the integration tests and the acceptance suite.

#![allow(dead_code)]

use std::path::Path;

use cineseg::container::sha256_hex;
use cineseg_core::grid::{CineStudy, Frame, GridShape, LabelVolume, ScalarVolume, Spacing};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const GOLDEN_NIFTI: &str = concat!(
    env!("CARGO_MANIFEST_DIR"),
    "/tests/data/zeros_4x4x4_f32.nii"
);

/// A hand-rolled NIfTI-1 single-file image.
#[derive(Debug, Clone)]
pub struct NiftiSpec {
    pub dim: [i16; 8],
    pub datatype: i16,
    pub pixdim: [f32; 8],
    pub vox_offset: f32,
    pub scl_slope: f32,
    pub scl_inter: f32,
    pub magic: [u8; 4],
    pub big_endian: bool,
    /// Voxel payload, already encoded in the target datatype and byte order.
    pub data: Vec<u8>,
}

impl NiftiSpec {
    /// float32 volume of the given values, little-endian, unit spacing.
    pub fn float32(dims: [usize; 3], values: &[f32]) -> Self {
        Self {
            dim: [
                3,
                dims[0] as i16,
                dims[1] as i16,
                dims[2] as i16,
                1,
                1,
                1,
                1,
            ],
            datatype: 16,
            pixdim: [1.0; 8],
            vox_offset: 352.0,
            scl_slope: 0.0,
            scl_inter: 0.0,
            magic: *b"n+1\0",
            big_endian: false,
            data: values.iter().flat_map(|v| v.to_le_bytes()).collect(),
        }
    }

    pub fn uint8(dims: [usize; 3], values: &[u8]) -> Self {
        Self {
            datatype: 2,
            data: values.to_vec(),
            ..Self::float32(dims, &[])
        }
    }

    pub fn bytes(&self) -> Vec<u8> {
        let mut h = vec![0u8; 348];
        let be = self.big_endian;
        let put = |h: &mut Vec<u8>, at: usize, b: &[u8]| h[at..at + b.len()].copy_from_slice(b);
        let i32b = |v: i32| if be { v.to_be_bytes() } else { v.to_le_bytes() };
        let i16b = |v: i16| if be { v.to_be_bytes() } else { v.to_le_bytes() };
        let f32b = |v: f32| if be { v.to_be_bytes() } else { v.to_le_bytes() };
        put(&mut h, 0, &i32b(348));
        for (i, d) in self.dim.iter().enumerate() {
            put(&mut h, 40 + 2 * i, &i16b(*d));
        }
        put(&mut h, 70, &i16b(self.datatype));
        let bitpix = match self.datatype {
            2 => 8,
            4 => 16,
            _ => 32,
        };
        put(&mut h, 72, &i16b(bitpix));
        for (i, p) in self.pixdim.iter().enumerate() {
            put(&mut h, 76 + 4 * i, &f32b(*p));
        }
        put(&mut h, 108, &f32b(self.vox_offset));
        put(&mut h, 112, &f32b(self.scl_slope));
        put(&mut h, 116, &f32b(self.scl_inter));
        put(&mut h, 344, &self.magic);
        let pad = (self.vox_offset.max(348.0) as usize).saturating_sub(348);
        h.extend(std::iter::repeat_n(0u8, pad));
        h.extend(&self.data);
        h
    }

    pub fn write(&self, path: &Path) {
        std::fs::write(path, self.bytes()).unwrap();
    }
}

/// A small random study: random grid, spacing and frame count, arbitrary
/// float intensities (including negative zero and subnormals) and labels.
pub fn random_study(r: &mut ChaCha8Rng, id: &str) -> CineStudy {
    let shape = GridShape::new(
        r.random_range(1..=7),
        r.random_range(1..=7),
        r.random_range(1..=7),
    )
    .unwrap();
    let spacing = Spacing::new(
        r.random_range(0.3..3.0),
        r.random_range(0.3..3.0),
        r.random_range(0.3..3.0),
    )
    .unwrap();
    let frames = (0..r.random_range(1..=4))
        .map(|_| {
            let values = (0..shape.len())
                .map(|_| match r.random_range(0..10) {
                    0 => -0.0,
                    1 => f32::from_bits(r.random_range(1..0x007f_ffff)),
                    _ => r.random_range(-1000.0..2000.0),
                })
                .collect();
            let labels = (0..shape.len()).map(|_| r.random_range(0..=7u8)).collect();
            Frame {
                image: ScalarVolume::new(shape, spacing, values).unwrap(),
                labels: LabelVolume::new(shape, spacing, labels).unwrap(),
            }
        })
        .collect();
    CineStudy::new(id, frames, r.random_bool(0.3)).unwrap()
}

/// Bit-level equality, so that NaN payloads and signed zeros count.
pub fn studies_bit_equal(a: &CineStudy, b: &CineStudy) -> bool {
    a.subject_id() == b.subject_id()
        && a.is_manual() == b.is_manual()
        && a.frame_count() == b.frame_count()
        && a.shape() == b.shape()
        && a.spacing().as_array().map(f64::to_bits) == b.spacing().as_array().map(f64::to_bits)
        && a.frames().iter().zip(b.frames()).all(|(x, y)| {
            x.labels.labels() == y.labels.labels()
                && x.image.values().iter().map(|v| v.to_bits()).eq(y
                    .image
                    .values()
                    .iter()
                    .map(|v| v.to_bits()))
        })
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Rewrites one file of a container and patches its hash in `study.json`, so
/// that only the content check under test can fail.
pub fn replace_with_valid_hash(dir: &Path, file: &str, bytes: &[u8]) {
    let manifest = dir.join("study.json");
    let text = std::fs::read_to_string(&manifest).unwrap();
    let old = sha256_hex(&std::fs::read(dir.join(file)).unwrap());
    std::fs::write(dir.join(file), bytes).unwrap();
    std::fs::write(&manifest, text.replace(&old, &sha256_hex(bytes))).unwrap();
}
