//! Classical one-dimensional ion motion in a moving axial well.

mod fourier;
mod full;
mod harmonic;

pub use fourier::{fourier_energy, fourier_energy_oracle, held_ramp_energy};
pub use full::integrate_full;
pub use harmonic::{integrate_harmonic, integrate_moving_well, Schedule};

use std::fmt::Write as _;

use crate::constants::joule_to_ev;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IonState {
    pub z: f64,
    pub v: f64,
    pub t: f64,
}

impl IonState {
    pub fn at_rest(z: f64) -> Self {
        Self { z, v: 0.0, t: 0.0 }
    }
}

/// Phase-space history with energy diagnostics.
///
/// `energy` is the lab-frame kinetic energy plus the potential energy above
/// the instantaneous well minimum; `potential` is the latter alone.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub samples: Vec<IonState>,
    /// Total energy in J.
    pub energy: Vec<f64>,
    /// Potential energy above the instantaneous minimum in J.
    pub potential: Vec<f64>,
    /// Instantaneous well minimum in m.
    pub well_minimum: Vec<f64>,
    pub lost: bool,
    pub loss_time: Option<f64>,
}

/// Figures of merit of one transport.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportResult {
    /// Energy at the end of the trajectory in eV.
    pub e_final: f64,
    /// Largest potential energy above the instantaneous minimum, or the
    /// final energy if larger, in eV.
    pub e_max: f64,
    /// Largest distance from the instantaneous minimum in m.
    pub max_excursion: f64,
    pub lost: bool,
}

impl Trajectory {
    pub(crate) fn push(&mut self, state: IonState, kinetic: f64, potential: f64, minimum: f64) {
        self.samples.push(state);
        self.energy.push(kinetic + potential);
        self.potential.push(potential);
        self.well_minimum.push(minimum);
    }

    pub fn final_state(&self) -> Option<IonState> {
        self.samples.last().copied()
    }

    pub fn summary(&self) -> TransportResult {
        let e_final = joule_to_ev(self.energy.last().copied().unwrap_or(0.0));
        let e_pot = joule_to_ev(self.potential.iter().cloned().fold(0.0, f64::max));
        let max_excursion = self
            .samples
            .iter()
            .zip(&self.well_minimum)
            .map(|(s, m)| (s.z - m).abs())
            .fold(0.0, f64::max);
        TransportResult {
            e_final,
            e_max: e_pot.max(e_final),
            max_excursion,
            lost: self.lost,
        }
    }

    /// Rows `t_us, z_um, v_m_per_s, e_meV`.
    pub fn to_table(&self) -> String {
        let mut out = String::from("# columns: t_us, z_um, v_m_per_s, e_meV\n");
        for (s, e) in self.samples.iter().zip(&self.energy) {
            let _ = writeln!(
                out,
                "{:.9e}, {:.9e}, {:.9e}, {:.9e}",
                s.t * 1e6,
                s.z * 1e6,
                s.v,
                joule_to_ev(*e) * 1e3
            );
        }
        out
    }
}

/// Energy-threshold loss proxy: lost when the largest energy exceeds
/// `threshold_fraction` of the axial depth (both in eV).
pub fn classify_loss(result: &TransportResult, axial_depth: f64, threshold_fraction: f64) -> bool {
    result.lost || result.e_max > threshold_fraction * axial_depth
}
