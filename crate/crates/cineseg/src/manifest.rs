//! Run directories: output-directory preparation, the lock file and the run
//! manifest.

use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use cineseg_core::grid::CineStudy;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::container::write_file;
use crate::error::{io, Error, Result};

pub const LOCK_FILE: &str = ".cineseg.lock";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Exclusive claim on an output directory; released on drop.
#[derive(Debug)]
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        let path = dir.join(LOCK_FILE);
        match fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
        {
            Ok(_) => Ok(Self { path }),
            Err(e) if e.kind() == ErrorKind::AlreadyExists => Err(Error::Locked(dir.to_path_buf())),
            Err(e) => Err(io(&path)(e)),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Creates `dir` if needed and locks it. A non-empty directory is refused
/// unless `force`, in which case the entries named in `owned` are removed
/// first; anything else in the directory is left alone.
pub fn prepare_out_dir(dir: &Path, force: bool, owned: &[&str]) -> Result<DirLock> {
    if dir.exists() && !dir.is_dir() {
        return Err(Error::Config(format!(
            "{} exists and is not a directory",
            dir.display()
        )));
    }
    fs::create_dir_all(dir).map_err(io(dir))?;
    if dir.join(LOCK_FILE).exists() {
        return Err(Error::Locked(dir.to_path_buf()));
    }
    let non_empty = fs::read_dir(dir).map_err(io(dir))?.next().is_some();
    if non_empty {
        if !force {
            return Err(Error::OutputNotEmpty(dir.to_path_buf()));
        }
        for name in owned {
            let p = dir.join(name);
            if p.is_dir() {
                fs::remove_dir_all(&p).map_err(io(&p))?;
            } else if p.exists() {
                fs::remove_file(&p).map_err(io(&p))?;
            }
        }
    }
    DirLock::acquire(dir)
}

/// Refuses to replace a non-empty file unless `force`.
pub fn check_out_file(path: &Path, force: bool) -> Result<()> {
    let occupied = fs::metadata(path)
        .map(|m| m.len() > 0 || m.is_dir())
        .unwrap_or(false);
    if occupied && !force {
        return Err(Error::OutputNotEmpty(path.to_path_buf()));
    }
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io(parent))?;
    }
    Ok(())
}

/// SHA-256 over every study's subject id, frame count and label bytes, in
/// the given order.
pub fn label_set_hash(studies: &[CineStudy]) -> String {
    let mut h = Sha256::new();
    for s in studies {
        h.update(s.subject_id().as_bytes());
        h.update([0u8]);
        h.update((s.frame_count() as u64).to_le_bytes());
        for l in s.labels() {
            h.update(l.labels());
        }
    }
    hex::encode(h.finalize())
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub selftrain: u64,
    pub train: u64,
    pub corruption: Option<u64>,
    /// Training seed of each round, first round first.
    pub rounds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationEntry {
    pub iteration: usize,
    pub label_hash: String,
    pub seconds: f64,
    pub mean_flagged_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub status: String,
    pub error: Option<String>,
    pub config: serde_json::Value,
    pub seeds: Seeds,
    pub threads: usize,
    pub started_unix_s: f64,
    pub finished_unix_s: Option<f64>,
    pub iterations: Vec<IterationEntry>,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, seeds: Seeds, threads: usize) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            status: "running".into(),
            error: None,
            config,
            seeds,
            threads,
            started_unix_s: unix_now(),
            finished_unix_s: None,
            iterations: Vec::new(),
        }
    }

    pub fn finish(&mut self, error: Option<String>) {
        self.status = if error.is_some() {
            "failed"
        } else {
            "completed"
        }
        .into();
        self.error = error;
        self.finished_unix_s = Some(unix_now());
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self).expect("manifest serializes");
        bytes.push(b'\n');
        write_file(&dir.join(MANIFEST_FILE), &bytes)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(io(&path))?;
        serde_json::from_str(&text).map_err(|e| Error::Manifest {
            path,
            reason: e.to_string(),
        })
    }
}
