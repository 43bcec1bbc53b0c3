use alloc::string::String;

/// Errors produced by the core kernels.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid spacing ({dx}, {dy}, {dz}): every component must be positive and finite")]
    InvalidSpacing { dx: f64, dy: f64, dz: f64 },
    #[error("invalid grid shape {nx}x{ny}x{nz}")]
    InvalidShape { nx: usize, ny: usize, nz: usize },
    #[error("coordinate ({x}, {y}, {z}) is outside a {nx}x{ny}x{nz} grid")]
    OutOfBounds {
        x: usize,
        y: usize,
        z: usize,
        nx: usize,
        ny: usize,
        nz: usize,
    },
    #[error("expected {expected} voxels, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("non-finite intensity at voxel {index}")]
    NonFinite { index: usize },
    #[error("label code {code} at voxel {index} is outside 0..=7")]
    LabelOutOfRange { index: usize, code: u8 },
    #[error("unknown structure name `{0}`")]
    UnknownStructure(String),
    #[error("volumes do not share shape and spacing")]
    GridMismatch,
    #[error("study `{subject}` frame {frame} does not share the grid of frame 0")]
    FrameGridMismatch { subject: String, frame: usize },
    #[error("study `{0}` has no frames")]
    EmptyStudy(String),
    #[error("{what} needs at least {needed} entries, got {got}")]
    TooFew {
        what: &'static str,
        needed: usize,
        got: usize,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("probabilities of voxel {voxel} sum to {sum}, expected 1")]
    NotNormalized { voxel: usize, sum: f64 },
    #[error("training diverged: loss became non-finite in epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("segmentation of `{subject}` frame {frame} failed: {reason}")]
    Segmentation {
        subject: String,
        frame: usize,
        reason: String,
    },
    #[error("structure {structure} does not fit inside the grid")]
    GeometryOverflow { structure: &'static str },
    #[error("model expects {expected} features, got {actual}")]
    FeatureMismatch { expected: usize, actual: usize },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
