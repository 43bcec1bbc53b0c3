//! Native study container: a directory holding `study.json` plus one raw
//! intensity file (`frame_###.img`, little-endian f32) and one raw label file
//! (`frame_###.lbl`, u8) per frame, both row-major with x fastest.

use std::fs;
use std::path::{Path, PathBuf};

use cineseg_core::grid::{CineStudy, Frame, GridShape, LabelVolume, ScalarVolume, Spacing};
use cineseg_core::student::StudentModel;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{io, Error, Result};

pub const MANIFEST_FILE: &str = "study.json";
pub const CONTAINER_FORMAT: &str = "cineseg-study";
pub const CONTAINER_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameFiles {
    pub image: String,
    pub image_sha256: String,
    pub labels: String,
    pub labels_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyManifest {
    pub format: String,
    pub version: u32,
    pub subject_id: String,
    pub frame_count: usize,
    pub shape: [usize; 3],
    pub spacing_mm: [f64; 3],
    pub is_manual: bool,
    pub frames: Vec<FrameFiles>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn image_bytes(v: &ScalarVolume) -> Vec<u8> {
    v.values().iter().flat_map(|x| x.to_le_bytes()).collect()
}

/// Subject ids double as directory names.
pub fn check_subject_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id != "."
        && id != ".."
        && !id.contains(['/', '\\', '\0'])
        && !id.starts_with('.');
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "subject id `{id}` cannot be used as a directory name"
        )))
    }
}

pub fn write_study(study: &CineStudy, dir: &Path) -> Result<()> {
    check_subject_id(study.subject_id())?;
    fs::create_dir_all(dir).map_err(io(dir))?;
    let mut frames = Vec::with_capacity(study.frame_count());
    for (t, f) in study.frames().iter().enumerate() {
        let image = format!("frame_{t:03}.img");
        let labels = format!("frame_{t:03}.lbl");
        let img = image_bytes(&f.image);
        let lbl = f.labels.labels();
        write_file(&dir.join(&image), &img)?;
        write_file(&dir.join(&labels), lbl)?;
        frames.push(FrameFiles {
            image,
            image_sha256: sha256_hex(&img),
            labels,
            labels_sha256: sha256_hex(lbl),
        });
    }
    let manifest = StudyManifest {
        format: CONTAINER_FORMAT.into(),
        version: CONTAINER_VERSION,
        subject_id: study.subject_id().into(),
        frame_count: study.frame_count(),
        shape: study.shape().dims(),
        spacing_mm: study.spacing().as_array(),
        is_manual: study.is_manual(),
        frames,
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    write_file(&dir.join(MANIFEST_FILE), text.as_bytes())
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(io(path))
}

fn manifest_error(path: &Path, reason: impl Into<String>) -> Error {
    Error::Manifest {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

pub fn read_manifest(dir: &Path) -> Result<StudyManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(io(&path))?;
    let m: StudyManifest =
        serde_json::from_str(&text).map_err(|e| manifest_error(&path, e.to_string()))?;
    if m.format != CONTAINER_FORMAT {
        return Err(manifest_error(
            &path,
            format!("format is `{}`, expected `{CONTAINER_FORMAT}`", m.format),
        ));
    }
    if m.version != CONTAINER_VERSION {
        return Err(manifest_error(
            &path,
            format!("unsupported version {}", m.version),
        ));
    }
    if m.frame_count == 0 || m.frames.len() != m.frame_count {
        return Err(manifest_error(
            &path,
            format!(
                "frame_count {} but {} frame entries",
                m.frame_count,
                m.frames.len()
            ),
        ));
    }
    check_subject_id(&m.subject_id).map_err(|e| manifest_error(&path, e.to_string()))?;
    for f in &m.frames {
        for name in [&f.image, &f.labels] {
            if name.is_empty() || name.contains(['/', '\\']) || name.starts_with('.') {
                return Err(manifest_error(
                    &path,
                    format!("frame file name `{name}` must be a plain file name"),
                ));
            }
        }
    }
    Ok(m)
}

/// Reads a file whose size and hash the manifest fixes.
fn read_checked(path: &Path, expected_len: u64, expected_hash: &str) -> Result<Vec<u8>> {
    let bytes = fs::read(path).map_err(io(path))?;
    let actual = bytes.len() as u64;
    if actual < expected_len {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected: expected_len,
            actual,
        });
    }
    if actual > expected_len {
        return Err(Error::TrailingData {
            path: path.to_path_buf(),
            expected: expected_len,
            actual,
        });
    }
    let hash = sha256_hex(&bytes);
    if !hash.eq_ignore_ascii_case(expected_hash) {
        return Err(Error::Integrity {
            path: path.to_path_buf(),
            expected: expected_hash.into(),
            actual: hash,
        });
    }
    Ok(bytes)
}

pub fn read_study(dir: &Path) -> Result<CineStudy> {
    let m = read_manifest(dir)?;
    let mpath = dir.join(MANIFEST_FILE);
    let [nx, ny, nz] = m.shape;
    let shape = GridShape::new(nx, ny, nz).map_err(|e| manifest_error(&mpath, e.to_string()))?;
    let [dx, dy, dz] = m.spacing_mm;
    let spacing = Spacing::new(dx, dy, dz).map_err(|e| manifest_error(&mpath, e.to_string()))?;
    let n = shape.len() as u64;

    let mut frames = Vec::with_capacity(m.frame_count);
    for f in &m.frames {
        let ipath = dir.join(&f.image);
        let raw = read_checked(&ipath, 4 * n, &f.image_sha256)?;
        let values = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let image = ScalarVolume::new(shape, spacing, values)?;

        let lpath = dir.join(&f.labels);
        let codes = read_checked(&lpath, n, &f.labels_sha256)?;
        if let Some((index, &value)) = codes.iter().enumerate().find(|(_, &c)| c > 7) {
            return Err(Error::LabelRange {
                path: lpath,
                index,
                value: value.into(),
            });
        }
        let labels = LabelVolume::new(shape, spacing, codes)?;
        frames.push(Frame { image, labels });
    }
    Ok(CineStudy::new(m.subject_id, frames, m.is_manual)?)
}

/// Study directories under `dir`, sorted by name.
///
/// `dir` may be a container itself, hold containers as subdirectories, or
/// hold them under a `studies/` subdirectory.
pub fn study_dirs(dir: &Path) -> Result<Vec<PathBuf>> {
    if dir.join(MANIFEST_FILE).is_file() {
        return Ok(vec![dir.to_path_buf()]);
    }
    let root = if dir.join("studies").is_dir() {
        dir.join("studies")
    } else {
        dir.to_path_buf()
    };
    let mut out = Vec::new();
    for entry in fs::read_dir(&root).map_err(io(&root))? {
        let p = entry.map_err(io(&root))?.path();
        if p.join(MANIFEST_FILE).is_file() {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

pub fn read_studies(dir: &Path) -> Result<Vec<CineStudy>> {
    let dirs = study_dirs(dir)?;
    if dirs.is_empty() {
        return Err(Error::Empty(format!(
            "{}: no study containers found",
            dir.display()
        )));
    }
    dirs.iter().map(|d| read_study(d)).collect()
}

/// Writes each study to `dir/<subject_id>`.
pub fn write_studies<'a>(
    studies: impl IntoIterator<Item = &'a CineStudy>,
    dir: &Path,
) -> Result<()> {
    for s in studies {
        check_subject_id(s.subject_id())?;
        write_study(s, &dir.join(s.subject_id()))?;
    }
    Ok(())
}

pub fn write_model(model: &StudentModel, path: &Path) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(model).expect("model serializes");
    bytes.push(b'\n');
    write_file(path, &bytes)
}

/// Reads a `model.json` written by `selftrain run`.
pub fn read_model(path: &Path) -> Result<StudentModel> {
    let text = fs::read_to_string(path).map_err(io(path))?;
    serde_json::from_str(&text).map_err(|e| manifest_error(path, e.to_string()))
}
