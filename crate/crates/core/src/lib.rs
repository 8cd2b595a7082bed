//! Ion transport in a segmented linear Paul trap.
//!
//! The crate is organised along the physical pipeline:
//!
//! * [`trap_model`] builds axial potentials from per-electrode basis
//!   functions and characterises the resulting wells (axial and radial).
//! * [`waveform`] turns an error-function transport ramp into electrode
//!   voltages, with DAC quantization, zero-order hold and RC filtering.
//! * [`dynamics`] integrates the classical axial motion of a single ion.
//! * [`cooling`] models Doppler-cooling fluorescence and inverts recovery
//!   traces into motional energies.
//! * [`micromotion`] analyses photon/RF-phase correlation histograms.
//! * [`experiment`] runs the full measurement sequence, Monte Carlo trials
//!   and parameter sweeps.

// `!(x > 0.0)` guards are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod cooling;
pub mod dynamics;
mod error;
pub mod experiment;
pub mod micromotion;
pub mod spline;
pub mod table;
pub mod trap_model;
pub mod waveform;

pub use error::{Error, Result};
