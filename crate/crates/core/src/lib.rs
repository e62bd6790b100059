//! Simulation and analysis of stimulated polarization-entangled photon pairs
//! produced by a nonlinear crystal pumped `N` times inside a passive resonator
//! that sits in a polarization Sagnac loop.
//!
//! The crate is organised bottom-up:
//!
//! * [`fock`] – a truncated four-mode bosonic Fock space (`aH, aV, bH, bV`),
//!   sparse ladder operators, the su(1,1) generators and a brute-force
//!   time-evolution oracle.
//! * [`resonator`] – the closed-form amplitude sum, pair probabilities and
//!   operating points of the multi-pass resonator.
//! * [`phase_plate`] – relative pump/pair phase accumulated in a tilted plate.
//! * [`polarization`] – two-photon polarization states, analyzers, fringe
//!   simulation, visibility and the sinusoidal fringe fit.
//! * [`tomography`] – 16-setting two-qubit tomography with linear inversion
//!   and maximum-likelihood reconstruction.
//! * [`verify`] – named numerical self-checks used by the `verify` command.

// Negated comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fock;
pub mod phase_plate;
pub mod polarization;
pub mod resonator;
pub mod rng;
pub mod tomography;
pub mod verify;

pub use error::{Error, Result};
pub use num_complex::Complex64;
