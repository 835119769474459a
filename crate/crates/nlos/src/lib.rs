//! Confocal non-line-of-sight (NLOS) reconstruction from under-sampled
//! transient measurements.
//!
//! The library covers the full pipeline: a physically exact forward
//! simulator for confocal transients, a joint reconstruction solver that
//! couples a sparse volumetric albedo with regularized 2D depth/albedo
//! maps, simpler baselines for comparison, image metrics, and binary file
//! formats plus runnable pipelines. See the crate examples for one
//! end-to-end program per capability, or the `nlos` binary for the same
//! pipelines driven from the command line.

pub mod diffprox;
pub mod error;
pub mod forward;
pub mod grid;
pub mod projection;

pub use error::{Error, Result};
pub use grid::{
    gamma_from, AlbedoMap, DepthMap, GradField, HessianField, SceneGrid, ScanMask, SolverParams,
    TransientCube, TransportKind, VoxelAlbedo,
};
