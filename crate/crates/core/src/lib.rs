//! Simulation and verification laboratory for relativistic velocity-alignment
//! dynamics, with the classical model as the large-c reference.
//!
//! Layout:
//! - [`vec3`]: small fixed-size vector type
//! - [`relativity`]: model parameters, kernels, kinematic maps, structural constants
//! - [`dynamics`]: right-hand sides and initial-state preparation
//! - [`integrator`]: fixed-step RK4 driver and trajectory storage
//! - [`diagnostics`]: diameters, Lyapunov functional, energy, flocking certificate
//! - [`climit`]: classical-limit deviation scans
//! - [`meanfield`]: cloud sampling, exact W1 transport, kinetic scans
//! - [`config`]: key = value run configuration files
//! - [`output`]: CSV trajectories, JSON reports, run manifests

pub mod climit;
pub mod config;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod integrator;
pub mod meanfield;
pub mod output;
pub mod relativity;
pub mod vec3;

pub use error::{Error, Result};

/// Worker threads for embarrassingly parallel scans, from the `RCS_THREADS`
/// environment variable. Defaults to 1; per-run numerics are unaffected
/// because each scan entry is integrated on a single thread.
pub fn thread_count() -> usize {
    std::env::var("RCS_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}
