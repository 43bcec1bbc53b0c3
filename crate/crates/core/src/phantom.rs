//! Deterministic synthetic beating-heart phantom with exact analytic labels.
//!
//! Geometry is a set of implicit surfaces evaluated at voxel centres
//! (`position_mm = index * spacing`). Per frame `t` of `T`, the ventricular
//! cavities scale by `c(t) = 1 - a (1 - cos(2 pi t / T)) / 2`; the myocardial
//! shell keeps its per-axis wall volume, so it thickens as the pool shrinks.
//!
//! Label precedence is fixed: LV_myo > LV > RV > LA > RA > aorta >
//! pulmonary_artery. Voxels exactly on the LV pool surface belong to the
//! myocardium.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CineStudy, Frame, GridShape, LabelVolume, ScalarVolume, Spacing, Structure};
use crate::rng::{frame_key, substream};

pub const BLOOD_HU: f32 = 300.0;
pub const MYOCARDIUM_HU: f32 = 100.0;
pub const BACKGROUND_HU: f32 = -50.0;
pub const CATHETER_HU: f32 = 800.0;

pub const MAX_CONTRACTION: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ellipsoid {
    pub center_mm: [f64; 3],
    pub radii_mm: [f64; 3],
}

impl Ellipsoid {
    /// Normalised quadratic form; `< 1` inside, `1` on the surface.
    #[inline]
    fn level(&self, p: [f64; 3], radii: [f64; 3]) -> f64 {
        let mut q = 0.0;
        for k in 0..3 {
            let d = (p[k] - self.center_mm[k]) / radii[k];
            q += d * d;
        }
        q
    }

    fn extent(&self, radii: [f64; 3]) -> ([f64; 3], [f64; 3]) {
        (
            core::array::from_fn(|k| self.center_mm[k] - radii[k]),
            core::array::from_fn(|k| self.center_mm[k] + radii[k]),
        )
    }
}

/// Cylinder along the z axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Vessel {
    pub center_xy_mm: [f64; 2],
    pub radius_mm: f64,
    /// Inclusive `[bottom, top]` in mm.
    pub z_range_mm: [f64; 2],
}

impl Vessel {
    #[inline]
    fn contains(&self, p: [f64; 3]) -> bool {
        let dx = p[0] - self.center_xy_mm[0];
        let dy = p[1] - self.center_xy_mm[1];
        p[2] >= self.z_range_mm[0]
            && p[2] <= self.z_range_mm[1]
            && dx * dx + dy * dy <= self.radius_mm * self.radius_mm
    }

    fn extent(&self) -> ([f64; 3], [f64; 3]) {
        let [cx, cy] = self.center_xy_mm;
        let r = self.radius_mm;
        (
            [cx - r, cy - r, self.z_range_mm[0]],
            [cx + r, cy + r, self.z_range_mm[1]],
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeartGeometry {
    /// LV blood pool at end-diastole.
    pub lv_pool: Ellipsoid,
    /// Myocardial wall thickness at end-diastole, added to every pool radius.
    pub myo_thickness_mm: f64,
    /// RV ellipsoid; the RV label is whatever of it lies outside the LV.
    pub rv: Ellipsoid,
    pub la: Ellipsoid,
    pub ra: Ellipsoid,
    pub aorta: Vessel,
    pub pulmonary_artery: Vessel,
}

impl Default for HeartGeometry {
    /// Sized for a 64³ grid at 1 mm.
    fn default() -> Self {
        Self {
            lv_pool: Ellipsoid {
                center_mm: [26.0, 32.0, 22.0],
                radii_mm: [8.0, 8.0, 11.0],
            },
            myo_thickness_mm: 3.0,
            rv: Ellipsoid {
                center_mm: [40.0, 32.0, 22.0],
                radii_mm: [9.0, 11.0, 12.0],
            },
            la: Ellipsoid {
                center_mm: [24.0, 36.0, 44.0],
                radii_mm: [7.0, 7.0, 7.0],
            },
            ra: Ellipsoid {
                center_mm: [42.0, 30.0, 44.0],
                radii_mm: [7.0, 7.0, 7.0],
            },
            aorta: Vessel {
                center_xy_mm: [32.0, 24.0],
                radius_mm: 3.5,
                z_range_mm: [30.0, 62.0],
            },
            pulmonary_artery: Vessel {
                center_xy_mm: [36.0, 42.0],
                radius_mm: 3.5,
                z_range_mm: [30.0, 62.0],
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomConfig {
    pub shape: GridShape,
    pub spacing: Spacing,
    pub frames: usize,
    pub seed: u64,
    /// Fractional cavity shrink at end-systole, in `[0, 0.4]`.
    pub contraction_amplitude: f64,
    pub noise_sigma_hu: f64,
    /// Adds a bright line through the LV pool without touching labels.
    pub catheter: bool,
    pub geometry: HeartGeometry,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        Self {
            shape: GridShape::new(64, 64, 64).expect("valid"),
            spacing: Spacing::unit(),
            frames: 10,
            seed: 20_240_601,
            contraction_amplitude: 0.3,
            noise_sigma_hu: 20.0,
            catheter: false,
            geometry: HeartGeometry::default(),
        }
    }
}

impl PhantomConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(String::from(msg)));
        if self.frames == 0 {
            return bad("phantom needs at least one frame");
        }
        if !(0.0..=MAX_CONTRACTION).contains(&self.contraction_amplitude) {
            return bad("contraction_amplitude must lie in [0, 0.4]");
        }
        if !(self.noise_sigma_hu.is_finite() && self.noise_sigma_hu >= 0.0) {
            return bad("noise_sigma_hu must be finite and non-negative");
        }
        let g = &self.geometry;
        let positive = |v: &[f64]| v.iter().all(|r| r.is_finite() && *r > 0.0);
        if !positive(&g.lv_pool.radii_mm)
            || !positive(&g.rv.radii_mm)
            || !positive(&g.la.radii_mm)
            || !positive(&g.ra.radii_mm)
            || !positive(&[g.aorta.radius_mm, g.pulmonary_artery.radius_mm])
        {
            return bad("every radius must be positive");
        }
        if !(g.myo_thickness_mm.is_finite() && g.myo_thickness_mm > 0.0) {
            return bad("myo_thickness_mm must be positive so the shell encloses the pool");
        }
        for v in [&g.aorta, &g.pulmonary_artery] {
            if v.z_range_mm[0] > v.z_range_mm[1] {
                return bad("vessel z_range_mm must be [bottom, top]");
            }
        }

        let dims = self.shape.dims();
        let sp = self.spacing.as_array();
        let fits = |(lo, hi): ([f64; 3], [f64; 3])| {
            (0..3).all(|k| lo[k] >= 0.0 && hi[k] <= (dims[k] - 1) as f64 * sp[k])
        };
        // Cavities and the shell are largest at t = 0.
        let checks = [
            ("LV_myo", g.lv_pool.extent(g.myo_outer_radii(1.0))),
            ("RV", g.rv.extent(g.rv.radii_mm)),
            ("LA", g.la.extent(g.la.radii_mm)),
            ("RA", g.ra.extent(g.ra.radii_mm)),
            ("aorta", g.aorta.extent()),
            ("pulmonary_artery", g.pulmonary_artery.extent()),
        ];
        for (structure, extent) in checks {
            if !fits(extent) {
                return Err(Error::GeometryOverflow { structure });
            }
        }
        Ok(())
    }

    /// `c(t) = 1 - a (1 - cos(2 pi t / T)) / 2`.
    pub fn contraction(&self, t: usize) -> f64 {
        let phase = 2.0 * PI * t as f64 / self.frames as f64;
        1.0 - self.contraction_amplitude * (1.0 - libm::cos(phase)) / 2.0
    }
}

impl HeartGeometry {
    fn lv_pool_radii(&self, c: f64) -> [f64; 3] {
        self.lv_pool.radii_mm.map(|r| r * c)
    }

    /// Outer shell radii conserving `R_out^3 - R_in^3` on every axis.
    fn myo_outer_radii(&self, c: f64) -> [f64; 3] {
        core::array::from_fn(|k| {
            let inner0 = self.lv_pool.radii_mm[k];
            let outer0 = inner0 + self.myo_thickness_mm;
            let inner = inner0 * c;
            libm::cbrt(inner * inner * inner + outer0 * outer0 * outer0 - inner0 * inner0 * inner0)
        })
    }

    fn rv_radii(&self, c: f64) -> [f64; 3] {
        self.rv.radii_mm.map(|r| r * c)
    }
}

/// Labels of one frame at contraction factor `c`.
pub fn phantom_labels(cfg: &PhantomConfig, c: f64) -> LabelVolume {
    let g = &cfg.geometry;
    let pool = g.lv_pool_radii(c);
    let outer = g.myo_outer_radii(c);
    let rv = g.rv_radii(c);
    let shape = cfg.shape;
    let [dx, dy, dz] = cfg.spacing.as_array();
    let mut labels = Vec::with_capacity(shape.len());
    for z in 0..shape.nz() {
        for y in 0..shape.ny() {
            for x in 0..shape.nx() {
                let p = [x as f64 * dx, y as f64 * dy, z as f64 * dz];
                let s = if g.lv_pool.level(p, outer) <= 1.0 {
                    if g.lv_pool.level(p, pool) < 1.0 {
                        Structure::Lv
                    } else {
                        Structure::LvMyo
                    }
                } else if g.rv.level(p, rv) <= 1.0 {
                    Structure::Rv
                } else if g.la.level(p, g.la.radii_mm) <= 1.0 {
                    Structure::La
                } else if g.ra.level(p, g.ra.radii_mm) <= 1.0 {
                    Structure::Ra
                } else if g.aorta.contains(p) {
                    Structure::Aorta
                } else if g.pulmonary_artery.contains(p) {
                    Structure::PulmonaryArtery
                } else {
                    Structure::Background
                };
                labels.push(s.code());
            }
        }
    }
    LabelVolume::new(shape, cfg.spacing, labels).expect("codes are canonical")
}

pub fn tissue_hu(s: Structure) -> f32 {
    match s {
        Structure::Background => BACKGROUND_HU,
        Structure::LvMyo => MYOCARDIUM_HU,
        _ => BLOOD_HU,
    }
}

fn render_intensities(cfg: &PhantomConfig, labels: &LabelVolume, noise_key: u64) -> ScalarVolume {
    let shape = cfg.shape;
    let mut values: Vec<f32> = labels
        .labels()
        .iter()
        .map(|&c| tissue_hu(Structure::ALL[c as usize]))
        .collect();

    if cfg.catheter {
        // Runs along z through the LV centre, from the pool floor to the top of the grid.
        let g = &cfg.geometry;
        let sp = cfg.spacing.as_array();
        let cx = g.lv_pool.center_mm[0] / sp[0];
        let cy = g.lv_pool.center_mm[1] / sp[1];
        let z0 =
            libm::ceil((g.lv_pool.center_mm[2] - g.lv_pool.radii_mm[2]) / sp[2]).max(0.0) as usize;
        for z in z0..shape.nz() {
            for y in 0..shape.ny() {
                for x in 0..shape.nx() {
                    let (ex, ey) = (x as f64 - cx, y as f64 - cy);
                    if ex * ex + ey * ey <= 1.0 {
                        values[shape.index(x, y, z)] = CATHETER_HU;
                    }
                }
            }
        }
    }

    if cfg.noise_sigma_hu > 0.0 {
        let normal = Normal::new(0.0, cfg.noise_sigma_hu).expect("validated sigma");
        let mut rng = substream(cfg.seed, noise_key);
        for v in &mut values {
            *v += normal.sample(&mut rng) as f32;
        }
    }
    ScalarVolume::new(shape, cfg.spacing, values).expect("finite intensities")
}

/// One subject's cine study; labels are the exact ground truth.
pub fn generate_phantom(cfg: &PhantomConfig, subject_id: &str) -> Result<CineStudy> {
    cfg.validate()?;
    let frames = (0..cfg.frames)
        .map(|t| {
            let labels = phantom_labels(cfg, cfg.contraction(t));
            let image = render_intensities(cfg, &labels, frame_key(subject_id, t));
            Frame { image, labels }
        })
        .collect();
    CineStudy::new(subject_id, frames, false)
}

/// Subject identifiers used by [`generate_cohort`].
pub fn subject_id(index: usize) -> String {
    alloc::format!("subject_{index:02}")
}

pub fn generate_cohort(cfg: &PhantomConfig, count: usize) -> Result<Vec<CineStudy>> {
    (0..count)
        .map(|i| generate_phantom(cfg, &subject_id(i)))
        .collect()
}
