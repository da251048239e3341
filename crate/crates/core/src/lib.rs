//! Simulation and estimation pipeline for automotive radar SLAM with
//! reconfigurable holographic surfaces (RHS).
//!
//! The crate follows the processing chain:
//!
//! * [`rhs`]: aperture geometry and the RHS / phased-array radiation model
//! * [`pattern`]: offline max-min side-lobe optimization and the pattern bank
//! * [`scene`]: ground truth and per-slot echo synthesis
//! * [`pointcloud`]: matched-filter ranging and OMP angle estimation
//! * [`slam`]: registration, data association and the particle filter
//! * [`config`], [`pipeline`], [`metrics`], [`io`]: run orchestration and artifacts

pub mod config;
pub mod error;
pub mod frame;
pub mod io;
pub mod metrics;
pub mod pattern;
pub mod pipeline;
pub mod pointcloud;
pub mod rhs;
pub mod scene;
pub mod seed;
pub mod slam;

pub use error::{Error, Result};
