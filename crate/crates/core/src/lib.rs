//! Simulation and reconstruction of photon-number-conditioned optical states
//! from phase-randomized two-mode homodyne data.

pub mod analysis;
pub mod conditioning;
pub mod config;
pub mod error;
pub mod estimator;
pub mod exact_sum;
pub mod exec;
pub mod fock;
pub mod hermite;
pub mod pattern;
pub mod pipeline;
pub mod records;
pub mod sampler;

pub use error::{Error, ErrorKind, Result};
