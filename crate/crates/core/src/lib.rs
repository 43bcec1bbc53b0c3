//! Kernels for iterative pseudo-label self-training of 4D (3D + time) cardiac
//! segmentations: voxel grids, evaluation metrics, plausibility flagging,
//! temporal-consistency analytics, a synthetic beating-heart phantom, a
//! simulated foundation segmenter, a trainable voxel classifier and the
//! self-training loop itself.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the thread pool and
//! the command-line interface live in the `cineseg` crate.

#![no_std]
extern crate alloc;

pub mod error;
pub mod exec;
pub mod foundation;
pub mod grid;
pub mod metrics;
pub mod morphology;
pub mod phantom;
pub mod qc;
pub mod rng;
pub mod segmenter;
pub mod selftrain;
pub mod stats;
pub mod student;
pub mod temporal;

pub use error::{Error, Result};
pub use exec::{Executor, Sequential};
pub use grid::{
    CineStudy, Frame, GridShape, LabelVolume, Mask, PerStructure, ScalarVolume, Spacing, Structure,
    NUM_CLASSES,
};
