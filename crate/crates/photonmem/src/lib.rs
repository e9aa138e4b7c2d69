//! Simulation toolkit for a hybrid quantum-network building block: a
//! cavity-QED single-photon source driven by V-STIRAP, an EIT vapour-cell
//! memory storing flying qubits as spin waves, photon indistinguishability
//! measures, and a Monte Carlo model of repeat-until-success cluster
//! growth over these components.
//!
//! Unit conventions throughout the crate: angular rates in rad/us, times in
//! us, cavity geometry in um, cell geometry in cm. The CLI config layer
//! converts from plain MHz at the boundary (see [`config`]).

pub mod cavity;
pub mod config;
pub mod eit;
pub mod grid;
pub mod interference;
pub mod io;
pub mod rus;
pub mod scenario;

pub use grid::{PhotonWavepacket, TimeGrid};

/// Vacuum speed of light in um/us.
pub const SPEED_OF_LIGHT_UM_PER_US: f64 = 2.99792458e8;
/// Vacuum speed of light in cm/us.
pub const SPEED_OF_LIGHT_CM_PER_US: f64 = 2.99792458e4;
