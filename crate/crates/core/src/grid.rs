//! Voxel-grid domain types shared by every module.
//!
//! Memory layout is row-major with x fastest: `index = z * ny * nx + y * nx + x`.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Voxel edge lengths in millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct Spacing {
    dx: f64,
    dy: f64,
    dz: f64,
}

impl Spacing {
    pub fn new(dx: f64, dy: f64, dz: f64) -> Result<Self> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if ok(dx) && ok(dy) && ok(dz) {
            Ok(Self { dx, dy, dz })
        } else {
            Err(Error::InvalidSpacing { dx, dy, dz })
        }
    }

    pub fn isotropic(d: f64) -> Result<Self> {
        Self::new(d, d, d)
    }

    pub fn unit() -> Self {
        Self {
            dx: 1.0,
            dy: 1.0,
            dz: 1.0,
        }
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dy(&self) -> f64 {
        self.dy
    }

    pub fn dz(&self) -> f64 {
        self.dz
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.dx, self.dy, self.dz]
    }

    /// Volume of one voxel in mm³.
    pub fn voxel_volume(&self) -> f64 {
        self.dx * self.dy * self.dz
    }

    pub fn min_component(&self) -> f64 {
        self.dx.min(self.dy).min(self.dz)
    }
}

impl TryFrom<[f64; 3]> for Spacing {
    type Error = Error;

    fn try_from(v: [f64; 3]) -> Result<Self> {
        Self::new(v[0], v[1], v[2])
    }
}

impl From<Spacing> for [f64; 3] {
    fn from(s: Spacing) -> Self {
        s.as_array()
    }
}

/// Voxel counts per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[usize; 3]", into = "[usize; 3]")]
pub struct GridShape {
    nx: usize,
    ny: usize,
    nz: usize,
}

impl GridShape {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Result<Self> {
        let len = nx.checked_mul(ny).and_then(|v| v.checked_mul(nz));
        match len {
            Some(n) if nx > 0 && ny > 0 && nz > 0 && n <= isize::MAX as usize => {
                Ok(Self { nx, ny, nz })
            }
            _ => Err(Error::InvalidShape { nx, ny, nz }),
        }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn nz(&self) -> usize {
        self.nz
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    /// Total voxel count.
    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, x: usize, y: usize, z: usize) -> bool {
        x < self.nx && y < self.ny && z < self.nz
    }

    /// Row-major linear index of `(x, y, z)`; rejects out-of-bounds coordinates.
    pub fn linear_index(&self, x: usize, y: usize, z: usize) -> Result<usize> {
        if self.contains(x, y, z) {
            Ok(self.index(x, y, z))
        } else {
            Err(Error::OutOfBounds {
                x,
                y,
                z,
                nx: self.nx,
                ny: self.ny,
                nz: self.nz,
            })
        }
    }

    /// Unchecked variant of [`GridShape::linear_index`] for hot loops.
    #[inline(always)]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        debug_assert!(self.contains(x, y, z));
        (z * self.ny + y) * self.nx + x
    }

    #[inline(always)]
    pub fn delinearize(&self, index: usize) -> (usize, usize, usize) {
        let x = index % self.nx;
        let rest = index / self.nx;
        (x, rest % self.ny, rest / self.ny)
    }
}

impl TryFrom<[usize; 3]> for GridShape {
    type Error = Error;

    fn try_from(v: [usize; 3]) -> Result<Self> {
        Self::new(v[0], v[1], v[2])
    }
}

impl From<GridShape> for [usize; 3] {
    fn from(s: GridShape) -> Self {
        s.dims()
    }
}

impl fmt::Display for GridShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.nx, self.ny, self.nz)
    }
}

/// Canonical structure set: background plus seven cardiac structures.
///
/// Codes are fixed; foreign label conventions are remapped at the IO boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum Structure {
    Background = 0,
    #[serde(rename = "LV_myo")]
    LvMyo = 1,
    #[serde(rename = "LV")]
    Lv = 2,
    #[serde(rename = "RV")]
    Rv = 3,
    #[serde(rename = "LA")]
    La = 4,
    #[serde(rename = "RA")]
    Ra = 5,
    Aorta = 6,
    PulmonaryArtery = 7,
}

/// Number of label codes including background.
pub const NUM_CLASSES: usize = 8;

impl Structure {
    pub const ALL: [Structure; NUM_CLASSES] = [
        Structure::Background,
        Structure::LvMyo,
        Structure::Lv,
        Structure::Rv,
        Structure::La,
        Structure::Ra,
        Structure::Aorta,
        Structure::PulmonaryArtery,
    ];

    /// The seven non-background structures in code order, which is also
    /// decreasing label precedence.
    pub const FOREGROUND: [Structure; 7] = [
        Structure::LvMyo,
        Structure::Lv,
        Structure::Rv,
        Structure::La,
        Structure::Ra,
        Structure::Aorta,
        Structure::PulmonaryArtery,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Structure::Background => "background",
            Structure::LvMyo => "LV_myo",
            Structure::Lv => "LV",
            Structure::Rv => "RV",
            Structure::La => "LA",
            Structure::Ra => "RA",
            Structure::Aorta => "aorta",
            Structure::PulmonaryArtery => "pulmonary_artery",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|s| s.name() == name)
            .ok_or_else(|| Error::UnknownStructure(String::from(name)))
    }

    /// Thin vessels, exempt from the single-component plausibility rule.
    pub fn is_vessel(self) -> bool {
        matches!(self, Structure::Aorta | Structure::PulmonaryArtery)
    }

    /// Position among the seven foreground structures; `None` for background.
    pub fn foreground_index(self) -> Option<usize> {
        (self.code() as usize).checked_sub(1)
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One value per foreground structure, indexed by [`Structure`].
///
/// Serializes as a map from structure name to value, in code order.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PerStructure<T>(pub [T; 7]);

impl<T: Serialize> Serialize for PerStructure<T> {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> core::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = ser.serialize_map(Some(7))?;
        for (s, v) in self.iter() {
            map.serialize_entry(s.name(), v)?;
        }
        map.end()
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for PerStructure<T> {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> core::result::Result<Self, D::Error> {
        struct Visit<T>(core::marker::PhantomData<T>);

        impl<'de, T: Deserialize<'de>> serde::de::Visitor<'de> for Visit<T> {
            type Value = PerStructure<T>;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a map with one entry per foreground structure")
            }

            fn visit_map<A: serde::de::MapAccess<'de>>(
                self,
                mut access: A,
            ) -> core::result::Result<Self::Value, A::Error> {
                use serde::de::Error as _;
                let mut slots: [Option<T>; 7] = Default::default();
                while let Some(name) = access.next_key::<String>()? {
                    let s = Structure::from_name(&name)
                        .ok()
                        .and_then(Structure::foreground_index)
                        .ok_or_else(|| {
                            A::Error::custom(alloc::format!("unknown structure `{name}`"))
                        })?;
                    if slots[s].is_some() {
                        return Err(A::Error::custom(alloc::format!(
                            "duplicate structure `{name}`"
                        )));
                    }
                    slots[s] = Some(access.next_value()?);
                }
                let mut out = Vec::with_capacity(7);
                for (i, v) in slots.into_iter().enumerate() {
                    let name = Structure::FOREGROUND[i].name();
                    out.push(v.ok_or_else(|| {
                        A::Error::custom(alloc::format!("missing structure `{name}`"))
                    })?);
                }
                let arr: [T; 7] = out
                    .try_into()
                    .map_err(|_| A::Error::custom("seven entries"))?;
                Ok(PerStructure(arr))
            }
        }

        de.deserialize_map(Visit(core::marker::PhantomData))
    }
}

impl<T> PerStructure<T> {
    pub fn from_fn(mut f: impl FnMut(Structure) -> T) -> Self {
        Self(core::array::from_fn(|i| f(Structure::FOREGROUND[i])))
    }

    pub fn iter(&self) -> impl Iterator<Item = (Structure, &T)> {
        Structure::FOREGROUND.iter().copied().zip(self.0.iter())
    }

    pub fn map<U>(&self, mut f: impl FnMut(Structure, &T) -> U) -> PerStructure<U> {
        PerStructure::from_fn(|s| f(s, &self[s]))
    }
}

impl<T> Index<Structure> for PerStructure<T> {
    type Output = T;

    fn index(&self, s: Structure) -> &T {
        let i = s
            .foreground_index()
            .expect("background has no per-structure slot");
        &self.0[i]
    }
}

impl<T> IndexMut<Structure> for PerStructure<T> {
    fn index_mut(&mut self, s: Structure) -> &mut T {
        let i = s
            .foreground_index()
            .expect("background has no per-structure slot");
        &mut self.0[i]
    }
}

/// Dense boolean volume.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    shape: GridShape,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(shape: GridShape, data: Vec<bool>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::LengthMismatch {
                expected: shape.len(),
                actual: data.len(),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn empty(shape: GridShape) -> Self {
        Self {
            shape,
            data: alloc::vec![false; shape.len()],
        }
    }

    pub fn full(shape: GridShape) -> Self {
        Self {
            shape,
            data: alloc::vec![true; shape.len()],
        }
    }

    pub fn from_fn(shape: GridShape, mut f: impl FnMut(usize, usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(shape.len());
        for z in 0..shape.nz() {
            for y in 0..shape.ny() {
                for x in 0..shape.nx() {
                    data.push(f(x, y, z));
                }
            }
        }
        Self { shape, data }
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [bool] {
        &mut self.data
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.data[self.shape.index(x, y, z)]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    /// Inclusive bounding box `(min, max)` of the set voxels.
    pub fn bounding_box(&self) -> Option<([usize; 3], [usize; 3])> {
        let mut lo = [usize::MAX; 3];
        let mut hi = [0usize; 3];
        let mut any = false;
        for (i, _) in self.data.iter().enumerate().filter(|(_, &b)| b) {
            let (x, y, z) = self.shape.delinearize(i);
            for (axis, v) in [x, y, z].into_iter().enumerate() {
                lo[axis] = lo[axis].min(v);
                hi[axis] = hi[axis].max(v);
            }
            any = true;
        }
        any.then_some((lo, hi))
    }
}

/// One 3D intensity frame (HU-like values).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarVolume {
    shape: GridShape,
    spacing: Spacing,
    values: Vec<f32>,
}

impl ScalarVolume {
    pub fn new(shape: GridShape, spacing: Spacing, values: Vec<f32>) -> Result<Self> {
        if values.len() != shape.len() {
            return Err(Error::LengthMismatch {
                expected: shape.len(),
                actual: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            shape,
            spacing,
            values,
        })
    }

    pub fn filled(shape: GridShape, spacing: Spacing, value: f32) -> Self {
        Self {
            shape,
            spacing,
            values: alloc::vec![value; shape.len()],
        }
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }
}

/// One 3D label map over the canonical structure codes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVolume {
    shape: GridShape,
    spacing: Spacing,
    labels: Vec<u8>,
}

// Spacing holds only positive finite floats, so equality is reflexive.
impl Eq for Spacing {}

impl LabelVolume {
    pub fn new(shape: GridShape, spacing: Spacing, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != shape.len() {
            return Err(Error::LengthMismatch {
                expected: shape.len(),
                actual: labels.len(),
            });
        }
        if let Some(index) = labels.iter().position(|&c| c as usize >= NUM_CLASSES) {
            return Err(Error::LabelOutOfRange {
                index,
                code: labels[index],
            });
        }
        Ok(Self {
            shape,
            spacing,
            labels,
        })
    }

    pub fn background(shape: GridShape, spacing: Spacing) -> Self {
        Self {
            shape,
            spacing,
            labels: alloc::vec![0; shape.len()],
        }
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<u8> {
        self.labels
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> Structure {
        Structure::ALL[self.labels[self.shape.index(x, y, z)] as usize]
    }

    pub fn set(&mut self, index: usize, s: Structure) {
        self.labels[index] = s.code();
    }

    pub fn same_grid(&self, other: &LabelVolume) -> bool {
        self.shape == other.shape && self.spacing == other.spacing
    }

    /// Boolean mask of voxels labelled `s`.
    pub fn foreground_mask(&self, s: Structure) -> Mask {
        let code = s.code();
        Mask {
            shape: self.shape,
            data: self.labels.iter().map(|&c| c == code).collect(),
        }
    }

    pub fn count(&self, s: Structure) -> usize {
        let code = s.code();
        self.labels.iter().filter(|&&c| c == code).count()
    }
}

/// Free-function form of [`LabelVolume::foreground_mask`].
pub fn foreground_mask(vol: &LabelVolume, s: Structure) -> Mask {
    vol.foreground_mask(s)
}

/// Free-function form of [`GridShape::linear_index`].
pub fn linear_index(shape: GridShape, x: usize, y: usize, z: usize) -> Result<usize> {
    shape.linear_index(x, y, z)
}

/// One time point of a cine study: intensities plus the current label map.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub image: ScalarVolume,
    pub labels: LabelVolume,
}

/// A subject's 4D sequence of `T` frames.
#[derive(Debug, Clone, PartialEq)]
pub struct CineStudy {
    subject_id: String,
    frames: Vec<Frame>,
    is_manual: bool,
}

impl CineStudy {
    pub fn new(subject_id: impl Into<String>, frames: Vec<Frame>, is_manual: bool) -> Result<Self> {
        let subject_id = subject_id.into();
        let Some(first) = frames.first() else {
            return Err(Error::EmptyStudy(subject_id));
        };
        let (shape, spacing) = (first.image.shape(), first.image.spacing());
        for (t, f) in frames.iter().enumerate() {
            let ok = f.image.shape() == shape
                && f.image.spacing() == spacing
                && f.labels.shape() == shape
                && f.labels.spacing() == spacing;
            if !ok {
                return Err(Error::FrameGridMismatch {
                    subject: subject_id,
                    frame: t,
                });
            }
        }
        Ok(Self {
            subject_id,
            frames,
            is_manual,
        })
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn is_manual(&self) -> bool {
        self.is_manual
    }

    pub fn shape(&self) -> GridShape {
        self.frames[0].image.shape()
    }

    pub fn spacing(&self) -> Spacing {
        self.frames[0].image.spacing()
    }

    pub fn labels(&self) -> impl Iterator<Item = &LabelVolume> {
        self.frames.iter().map(|f| &f.labels)
    }

    /// Replaces every frame's labels. Manual studies keep their labels; the
    /// call is rejected for them.
    pub fn replace_labels(&mut self, labels: Vec<LabelVolume>) -> Result<()> {
        if self.is_manual {
            return Err(Error::InvalidConfig(alloc::format!(
                "labels of manual study `{}` are fixed",
                self.subject_id
            )));
        }
        if labels.len() != self.frames.len() {
            return Err(Error::LengthMismatch {
                expected: self.frames.len(),
                actual: labels.len(),
            });
        }
        let (shape, spacing) = (self.shape(), self.spacing());
        if let Some(t) = labels
            .iter()
            .position(|l| l.shape() != shape || l.spacing() != spacing)
        {
            return Err(Error::FrameGridMismatch {
                subject: self.subject_id.clone(),
                frame: t,
            });
        }
        for (frame, l) in self.frames.iter_mut().zip(labels) {
            frame.labels = l;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn shape(nx: usize, ny: usize, nz: usize) -> GridShape {
        GridShape::new(nx, ny, nz).unwrap()
    }

    #[test]
    fn linear_index_examples() {
        assert_eq!(linear_index(shape(4, 4, 4), 0, 0, 0).unwrap(), 0);
        assert_eq!(linear_index(shape(4, 4, 4), 3, 3, 3).unwrap(), 63);
        assert_eq!(linear_index(shape(2, 3, 4), 1, 2, 0).unwrap(), 5);
    }

    #[test]
    fn linear_index_rejects_out_of_bounds() {
        let err = linear_index(shape(2, 3, 4), 2, 0, 0).unwrap_err();
        assert!(matches!(err, Error::OutOfBounds { x: 2, .. }));
        assert!(linear_index(shape(2, 3, 4), 0, 0, 4).is_err());
    }

    #[test]
    fn invalid_shape_and_spacing() {
        assert!(GridShape::new(0, 1, 1).is_err());
        assert!(GridShape::new(usize::MAX, 2, 2).is_err());
        assert!(Spacing::new(1.0, 0.0, 1.0).is_err());
        assert!(Spacing::new(1.0, f64::NAN, 1.0).is_err());
        assert!(Spacing::new(-1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn structure_codes_and_names_are_a_bijection() {
        for (i, s) in Structure::ALL.iter().enumerate() {
            assert_eq!(s.code() as usize, i);
            assert_eq!(Structure::from_code(i as u8), Some(*s));
            assert_eq!(Structure::from_name(s.name()).unwrap(), *s);
        }
        assert_eq!(Structure::from_code(8), None);
        assert!(Structure::from_name("LV myo").is_err());
    }

    #[test]
    fn foreground_mask_examples() {
        let s = shape(2, 1, 1);
        let sp = Spacing::unit();
        let bg = LabelVolume::background(s, sp);
        assert!(foreground_mask(&bg, Structure::Lv).is_empty());
        let lv = LabelVolume::new(s, sp, vec![2, 2]).unwrap();
        assert_eq!(foreground_mask(&lv, Structure::Lv).count(), 2);
        let pair = LabelVolume::new(s, sp, vec![2, 3]).unwrap();
        assert_eq!(
            foreground_mask(&pair, Structure::Rv).as_slice(),
            &[false, true]
        );
    }

    #[test]
    fn volumes_reject_bad_payloads() {
        let s = shape(2, 1, 1);
        let sp = Spacing::unit();
        assert!(matches!(
            LabelVolume::new(s, sp, vec![0, 9]),
            Err(Error::LabelOutOfRange { index: 1, code: 9 })
        ));
        assert!(matches!(
            ScalarVolume::new(s, sp, vec![0.0, f32::INFINITY]),
            Err(Error::NonFinite { index: 1 })
        ));
        assert!(ScalarVolume::new(s, sp, vec![0.0]).is_err());
    }

    #[test]
    fn study_requires_frames_on_one_grid() {
        let sp = Spacing::unit();
        let a = Frame {
            image: ScalarVolume::filled(shape(2, 2, 2), sp, 0.0),
            labels: LabelVolume::background(shape(2, 2, 2), sp),
        };
        let b = Frame {
            image: ScalarVolume::filled(shape(2, 2, 3), sp, 0.0),
            labels: LabelVolume::background(shape(2, 2, 3), sp),
        };
        assert!(CineStudy::new("s", vec![], false).is_err());
        assert!(matches!(
            CineStudy::new("s", vec![a.clone(), b], false),
            Err(Error::FrameGridMismatch { frame: 1, .. })
        ));
        let mut manual = CineStudy::new("m", vec![a.clone()], true).unwrap();
        assert!(manual
            .replace_labels(vec![LabelVolume::background(shape(2, 2, 2), sp)])
            .is_err());
    }

    #[test]
    fn bounding_box_of_mask() {
        let s = shape(4, 4, 4);
        let m = Mask::from_fn(s, |x, y, z| {
            (x, y, z) == (1, 2, 3) || (x, y, z) == (2, 0, 3)
        });
        assert_eq!(m.bounding_box(), Some(([1, 0, 3], [2, 2, 3])));
        assert_eq!(Mask::empty(s).bounding_box(), None);
    }
}
