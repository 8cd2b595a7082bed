//! Doppler cooling, fluorescence recovery and energy estimation.

mod estimate;
mod recovery;

pub use estimate::{estimate_energy, estimate_energy_with, invert_recovery_time, EnergyEstimate, ParameterUncertainty};
pub use recovery::{add_shot_noise, cycle_averages, recovery_time, simulate_recovery, FluorescenceTrace};

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::constants::{angular, joule_to_ev, HBAR};
use crate::{Error, Result};

/// Two-level cooling laser and detection chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaserParams {
    /// Wavelength in m.
    pub wavelength: f64,
    /// Natural linewidth in rad/s.
    pub gamma: f64,
    /// Laser detuning in rad/s (negative is red).
    pub detuning: f64,
    /// Peak saturation parameter at the beam centre.
    pub s0: f64,
    /// Gaussian beam waist (1/e^2 intensity radius) in m.
    pub w0: f64,
    /// Projection of the wave vector on the trap axis.
    pub k_axial: f64,
    /// Fraction of scattered photons that are counted.
    pub detection_efficiency: f64,
}

/// Detected count rate of an ion at rest in the default beam, in 1/s.
pub const STEADY_STATE_COUNT_RATE: f64 = 20e3;

impl Default for LaserParams {
    fn default() -> Self {
        let gamma = angular(21.6e6);
        let mut laser = Self {
            wavelength: 397e-9,
            gamma,
            detuning: -0.5 * gamma,
            s0: 1.0,
            w0: 60e-6,
            k_axial: 0.5f64.sqrt(),
            detection_efficiency: 1.0,
        };
        laser.detection_efficiency = laser.efficiency_for_rate(STEADY_STATE_COUNT_RATE);
        laser
    }
}

impl LaserParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength > 0.0 && self.gamma > 0.0 && self.w0 > 0.0) {
            return Err(Error::invalid("wavelength, linewidth and waist must be > 0"));
        }
        if !(self.s0 >= 0.0 && self.s0.is_finite() && self.detuning.is_finite()) {
            return Err(Error::invalid("s0 must be >= 0 and detuning finite"));
        }
        if !(self.detection_efficiency > 0.0 && self.detection_efficiency <= 1.0) {
            return Err(Error::invalid("detection efficiency must be in (0, 1]"));
        }
        if !(self.k_axial.abs() <= 1.0) {
            return Err(Error::invalid("axial projection must be in [-1, 1]"));
        }
        Ok(())
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    /// Detection efficiency for which an ion at rest in the beam centre
    /// gives `detected_rate` counts per second.
    pub fn efficiency_for_rate(&self, detected_rate: f64) -> f64 {
        detected_rate / scattering_rate(0.0, 0.0, self)
    }

    /// Peak saturation parameter for which an ion at rest in the beam
    /// centre gives `detected_rate` counts per second.
    pub fn saturation_for_rate(&self, detected_rate: f64) -> Result<f64> {
        let d = 2.0 * self.detuning / self.gamma;
        let max = 0.5 * self.gamma * self.detection_efficiency;
        if !(detected_rate > 0.0 && detected_rate < max) {
            return Err(Error::invalid(format!(
                "count rate {detected_rate} not reachable (limit {max})"
            )));
        }
        Ok(detected_rate * (1.0 + d * d) / (max - detected_rate))
    }
}

/// Photon scattering rate (1/s) of a two-level ion at axial velocity `v`
/// and position `z` in a Gaussian beam centred on `z = 0`.
pub fn scattering_rate(v: f64, z: f64, laser: &LaserParams) -> f64 {
    let s = laser.s0 * (-2.0 * z * z / (laser.w0 * laser.w0)).exp();
    let delta = laser.detuning - laser.k_axial * laser.wavenumber() * v;
    let d = 2.0 * delta / laser.gamma;
    0.5 * laser.gamma * s / (1.0 + s + d * d)
}

/// Doppler-limit energy hbar Gamma / 2 in eV.
pub fn doppler_limit_energy(laser: &LaserParams) -> f64 {
    joule_to_ev(0.5 * HBAR * laser.gamma)
}

/// Anomalous heating at a constant rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatingModel {
    /// Heating rate in eV/s.
    pub rate: f64,
    /// Energy quantum for shot noise in eV (one motional quantum).
    pub quantum: f64,
}

impl Default for HeatingModel {
    fn default() -> Self {
        Self {
            rate: 3e-3,
            quantum: joule_to_ev(HBAR * angular(200e3)),
        }
    }
}

/// Energy after heating for `duration` seconds. Without an RNG the mean
/// gain `rate * duration` is added; with one, a Poisson number of quanta.
pub fn apply_heating<R: Rng + ?Sized>(e: f64, model: &HeatingModel, duration: f64, rng: Option<&mut R>) -> Result<f64> {
    if !(duration >= 0.0 && model.rate >= 0.0) {
        return Err(Error::invalid("heating duration and rate must be >= 0"));
    }
    let mean = model.rate * duration;
    match rng {
        None => Ok(e + mean),
        Some(rng) => {
            if mean == 0.0 {
                return Ok(e);
            }
            if !(model.quantum > 0.0) {
                return Err(Error::invalid("heating quantum must be > 0 for shot noise"));
            }
            let quanta = Poisson::new(mean / model.quantum)
                .map_err(|err| Error::invalid(format!("heating shot noise: {err}")))?
                .sample(rng);
            Ok(e + quanta * model.quantum)
        }
    }
}
