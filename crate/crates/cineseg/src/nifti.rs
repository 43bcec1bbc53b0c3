//! Read-only ingestion of uncompressed single-file NIfTI-1 volumes.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use cineseg_core::grid::{GridShape, LabelVolume, ScalarVolume, Spacing};

use crate::error::{io, Error, Result};

pub const HEADER_SIZE: usize = 348;

pub const DT_UINT8: i16 = 2;
pub const DT_INT16: i16 = 4;
pub const DT_FLOAT32: i16 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Endian {
    Little,
    Big,
}

struct Reader<'a> {
    bytes: &'a [u8],
    endian: Endian,
}

impl Reader<'_> {
    fn take<const N: usize>(&self, at: usize) -> [u8; N] {
        self.bytes[at..at + N].try_into().expect("in bounds")
    }

    fn i16(&self, at: usize) -> i16 {
        let b = self.take::<2>(at);
        match self.endian {
            Endian::Little => i16::from_le_bytes(b),
            Endian::Big => i16::from_be_bytes(b),
        }
    }

    fn f32(&self, at: usize) -> f32 {
        let b = self.take::<4>(at);
        match self.endian {
            Endian::Little => f32::from_le_bytes(b),
            Endian::Big => f32::from_be_bytes(b),
        }
    }
}

/// Header fields this reader uses.
#[derive(Debug, Clone, PartialEq)]
pub struct NiftiHeader {
    pub dim: [i16; 8],
    pub datatype: i16,
    pub bitpix: i16,
    pub pixdim: [f32; 8],
    pub vox_offset: f32,
    pub scl_slope: f32,
    pub scl_inter: f32,
    pub little_endian: bool,
}

impl NiftiHeader {
    pub fn shape(&self) -> [usize; 3] {
        [
            self.dim[1] as usize,
            self.dim[2] as usize,
            self.dim[3] as usize,
        ]
    }

    fn bytes_per_voxel(&self) -> usize {
        match self.datatype {
            DT_UINT8 => 1,
            DT_INT16 => 2,
            _ => 4,
        }
    }
}

/// A decoded volume before conversion: raw stored values, scaling not applied.
#[derive(Debug, Clone)]
pub struct NiftiVolume {
    pub header: NiftiHeader,
    pub shape: GridShape,
    pub spacing: Spacing,
    pub raw: Vec<f64>,
}

impl NiftiVolume {
    /// Stored values with `scl_slope`/`scl_inter` applied when the slope is
    /// nonzero and finite.
    pub fn scaled(&self) -> Vec<f64> {
        let (m, b) = (self.header.scl_slope as f64, self.header.scl_inter as f64);
        if m != 0.0 && m.is_finite() && b.is_finite() {
            self.raw.iter().map(|v| v * m + b).collect()
        } else {
            self.raw.clone()
        }
    }
}

pub fn parse_nifti1(bytes: &[u8], path: &Path) -> Result<NiftiVolume> {
    let truncated = |expected: usize| Error::Truncated {
        path: path.to_path_buf(),
        expected: expected as u64,
        actual: bytes.len() as u64,
    };
    if bytes.len() < HEADER_SIZE {
        return Err(truncated(HEADER_SIZE));
    }
    let endian = match (
        i32::from_le_bytes(bytes[0..4].try_into().unwrap()),
        i32::from_be_bytes(bytes[0..4].try_into().unwrap()),
    ) {
        (348, _) => Endian::Little,
        (_, 348) => Endian::Big,
        _ => {
            return Err(Error::BadMagic {
                path: path.to_path_buf(),
            })
        }
    };
    match &bytes[344..348] {
        b"n+1\0" => {}
        b"ni1\0" => {
            return Err(Error::UnsupportedForm {
                path: path.to_path_buf(),
            })
        }
        _ => {
            return Err(Error::BadMagic {
                path: path.to_path_buf(),
            })
        }
    }
    let r = Reader { bytes, endian };
    let header = NiftiHeader {
        dim: core::array::from_fn(|i| r.i16(40 + 2 * i)),
        datatype: r.i16(70),
        bitpix: r.i16(72),
        pixdim: core::array::from_fn(|i| r.f32(76 + 4 * i)),
        vox_offset: r.f32(108),
        scl_slope: r.f32(112),
        scl_inter: r.f32(116),
        little_endian: endian == Endian::Little,
    };
    if !matches!(header.datatype, DT_UINT8 | DT_INT16 | DT_FLOAT32) {
        return Err(Error::UnsupportedDatatype {
            path: path.to_path_buf(),
            code: header.datatype,
        });
    }
    if header.dim[0] != 3 {
        return Err(Error::UnsupportedDimensions {
            path: path.to_path_buf(),
            dims: header.dim[0],
        });
    }
    let sp = [header.pixdim[1], header.pixdim[2], header.pixdim[3]];
    if sp.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
        return Err(Error::NonPositiveSpacing {
            path: path.to_path_buf(),
            spacing: sp,
        });
    }
    let bad_header = |reason: String| Error::Header {
        path: path.to_path_buf(),
        reason,
    };
    if header.dim[1..4].iter().any(|&d| d < 1) {
        return Err(bad_header(format!(
            "non-positive dimension in {:?}",
            &header.dim[1..4]
        )));
    }
    let [nx, ny, nz] = header.shape();
    let shape = GridShape::new(nx, ny, nz)?;
    let spacing = Spacing::new(sp[0] as f64, sp[1] as f64, sp[2] as f64)?;

    let offset = header.vox_offset;
    if !(offset >= 352.0 && offset.fract() == 0.0) {
        return Err(bad_header(format!(
            "vox_offset {offset} must be an integer >= 352"
        )));
    }
    let start = offset as usize;
    let width = header.bytes_per_voxel();
    let end = start + shape.len() * width;
    if bytes.len() < end {
        return Err(truncated(end));
    }
    let data = &bytes[start..end];
    let raw: Vec<f64> = match header.datatype {
        DT_UINT8 => data.iter().map(|&b| b as f64).collect(),
        DT_INT16 => data
            .chunks_exact(2)
            .map(|c| {
                let b = [c[0], c[1]];
                (if header.little_endian {
                    i16::from_le_bytes(b)
                } else {
                    i16::from_be_bytes(b)
                }) as f64
            })
            .collect(),
        _ => data
            .chunks_exact(4)
            .map(|c| {
                let b = [c[0], c[1], c[2], c[3]];
                (if header.little_endian {
                    f32::from_le_bytes(b)
                } else {
                    f32::from_be_bytes(b)
                }) as f64
            })
            .collect(),
    };
    Ok(NiftiVolume {
        header,
        shape,
        spacing,
        raw,
    })
}

fn read(path: &Path) -> Result<NiftiVolume> {
    let bytes = fs::read(path).map_err(io(path))?;
    parse_nifti1(&bytes, path)
}

/// Intensity volume with scaling applied.
pub fn read_nifti1_scalar(path: &Path) -> Result<ScalarVolume> {
    let v = read(path)?;
    let values = v.scaled().into_iter().map(|x| x as f32).collect();
    Ok(ScalarVolume::new(v.shape, v.spacing, values)?)
}

/// Label volume. Each scaled value must be an integer; `remap` translates
/// source codes to structure codes (unmapped codes pass through), and the
/// result must lie in `0..=7`.
pub fn read_nifti1_labels(path: &Path, remap: Option<&BTreeMap<i64, u8>>) -> Result<LabelVolume> {
    let v = read(path)?;
    let mut codes = Vec::with_capacity(v.raw.len());
    for (index, x) in v.scaled().into_iter().enumerate() {
        let range_err = |value: i64| Error::LabelRange {
            path: path.to_path_buf(),
            index,
            value,
        };
        if x.fract() != 0.0 || !x.is_finite() {
            return Err(range_err(x as i64));
        }
        let src = x as i64;
        let code = match remap.and_then(|m| m.get(&src)) {
            Some(&c) => c as i64,
            None => src,
        };
        if !(0..=7).contains(&code) {
            return Err(range_err(code));
        }
        codes.push(code as u8);
    }
    Ok(LabelVolume::new(v.shape, v.spacing, codes)?)
}
