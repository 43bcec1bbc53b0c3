use std::path::{Path, PathBuf};

/// Failures of the file formats, run directories and pipeline commands.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: content hash mismatch (manifest {expected}, file {actual})", path.display())]
    Integrity {
        path: PathBuf,
        expected: String,
        actual: String,
    },
    #[error("{}: truncated, expected {expected} bytes, found {actual}", path.display())]
    Truncated {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },
    #[error("{}: {actual} bytes where {expected} were expected", path.display())]
    TrailingData {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },
    #[error("{}: malformed manifest: {reason}", path.display())]
    Manifest { path: PathBuf, reason: String },
    #[error("{}: label value {value} at voxel {index} is outside 0..=7", path.display())]
    LabelRange {
        path: PathBuf,
        index: usize,
        value: i64,
    },
    #[error("{}: malformed NIfTI header: {reason}", path.display())]
    Header { path: PathBuf, reason: String },
    #[error("{}: not a NIfTI-1 file (bad magic)", path.display())]
    BadMagic { path: PathBuf },
    #[error("{}: two-file NIfTI (.hdr/.img) is not supported; convert to single-file .nii", path.display())]
    UnsupportedForm { path: PathBuf },
    #[error("{}: unsupported NIfTI datatype code {code}", path.display())]
    UnsupportedDatatype { path: PathBuf, code: i16 },
    #[error("{}: expected a 3D volume, header has dim[0] = {dims}", path.display())]
    UnsupportedDimensions { path: PathBuf, dims: i16 },
    #[error("{}: voxel spacing must be positive, got {spacing:?}", path.display())]
    NonPositiveSpacing { path: PathBuf, spacing: [f32; 3] },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unknown configuration key(s): {}", .0.join(", "))]
    UnknownKeys(Vec<String>),
    #[error("{}: output directory is not empty (pass --force to overwrite)", .0.display())]
    OutputNotEmpty(PathBuf),
    #[error("{}: directory is locked by another run (remove {} if stale)", .0.display(), .0.join(crate::manifest::LOCK_FILE).display())]
    Locked(PathBuf),
    #[error("{0}")]
    Empty(String),
    #[error(transparent)]
    Core(#[from] cineseg_core::Error),
    #[error(transparent)]
    SelfTrain(#[from] cineseg_core::selftrain::SelfTrainFailure),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}
