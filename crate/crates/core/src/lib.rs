//! Simulator of a reflection-based atom–photon conditional phase gate.
//!
//! The crate models photon reflection from a strongly coupled atom–cavity
//! system, composes the resulting gate with a calibrated imperfection
//! budget, drives the entangling protocols built on it and reconstructs the
//! produced states by tomography.

pub mod cavity;
pub mod config;
pub mod error;
pub mod par;
pub mod protocols;
pub mod pulse;
pub mod qlin;
pub mod rng;
pub mod tomography;

pub use error::{Error, Result};
