//! File formats, run directories and the command line for `cineseg`.
//!
//! The numerical pipeline lives in `cineseg_core`; this crate adds the
//! study container, a NIfTI-1 reader, TOML configuration, CSV/JSON/SVG
//! reports, a rayon executor and the `cineseg` binary.

pub mod cli;
pub mod config;
pub mod container;
pub mod error;
pub mod exec;
pub mod manifest;
pub mod nifti;
pub mod report;

pub use cineseg_core as core;
pub use error::{Error, Result};
