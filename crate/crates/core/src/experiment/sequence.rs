use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;

use super::trial_rng;
use crate::constants::ev_to_joule;
use crate::cooling::{apply_heating, doppler_limit_energy, simulate_recovery, FluorescenceTrace, HeatingModel, LaserParams};
use crate::dynamics::{classify_loss, integrate_full, IonState, TransportResult};
use crate::trap_model::{superpose, well_analysis, AxialBasis, IonSpecies, WellOptions};
use crate::waveform::{generate_waveform, morph, quantize, DacSpec, RampSpec, SolverConfig, VoltageWaveform};
use crate::{Error, Result};

/// What happens between the two morphing steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TransportMode {
    /// Out-and-back error-function transport.
    #[default]
    Ramp,
    /// Hold the initial transport potential for the ramp duration.
    Wait,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSpec {
    pub species: IonSpecies,
    /// Loading-configuration voltages, one per electrode.
    pub load_voltages: Vec<f64>,
    pub ramp: RampSpec,
    pub solver: SolverConfig,
    pub dac: Option<DacSpec>,
    pub mode: TransportMode,
    pub morph_steps: usize,
    pub morph_dt: f64,
    /// Displacement of the transport minimum from the loading minimum in m.
    pub morph_offset: f64,
    /// Hold time between morphing in and the ramp in s.
    pub delay: f64,
    /// Hold time between the ramp and morphing back in s.
    pub delay_after: f64,
    /// Time the ion stays in the loading well before the final energy is read.
    pub settle: f64,
    /// Integrator step in s.
    pub dt_int: f64,
    /// Half-width of the search window around each target position in m.
    pub well_window: f64,
    /// Motional energy in the loading well before the sequence in eV;
    /// `None` starts at the Doppler limit.
    pub initial_energy: Option<f64>,
    pub loss_threshold: f64,
    /// Probability of a loss per attempt that is not caused by transport.
    pub background_loss: f64,
    pub cooling: LaserParams,
    pub heating: HeatingModel,
    pub recovery_duration: f64,
    pub recovery_bin: f64,
    pub seed: u64,
}

/// Electrode voltages of the loading well: U7 = 6 V and U13 = 8 V.
pub fn default_load_voltages() -> Vec<f64> {
    let mut u = vec![0.0; 15];
    u[6] = 6.0;
    u[12] = 8.0;
    u
}

impl Default for SequenceSpec {
    fn default() -> Self {
        Self {
            species: IonSpecies::calcium40(),
            load_voltages: default_load_voltages(),
            ramp: RampSpec::default(),
            solver: SolverConfig::default(),
            dac: Some(DacSpec::default()),
            mode: TransportMode::Ramp,
            morph_steps: 10,
            morph_dt: 1e-6,
            morph_offset: 0.0,
            delay: 0.0,
            delay_after: 0.0,
            settle: 20e-6,
            dt_int: 10e-9,
            well_window: 1e-3,
            initial_energy: None,
            loss_threshold: 0.30,
            background_loss: 0.0,
            cooling: LaserParams::default(),
            heating: HeatingModel::default(),
            recovery_duration: 0.2,
            recovery_bin: 500e-6,
            seed: 1,
        }
    }
}

impl SequenceSpec {
    pub fn validate(&self) -> Result<()> {
        self.ramp.validate()?;
        self.solver.validate()?;
        self.cooling.validate()?;
        if let Some(d) = &self.dac {
            d.validate()?;
        }
        if self.morph_steps == 0 || !(self.morph_dt > 0.0) {
            return Err(Error::invalid("morphing needs at least one step of positive duration"));
        }
        if !(self.delay >= 0.0 && self.delay_after >= 0.0 && self.settle >= 0.0 && self.dt_int > 0.0 && self.well_window > 0.0) {
            return Err(Error::invalid("delays and settle must be >= 0; dt_int and well_window > 0"));
        }
        if !(self.morph_offset.is_finite()) {
            return Err(Error::invalid("morph offset must be finite"));
        }
        if self.initial_energy.is_some_and(|e| !(e >= 0.0 && e.is_finite())) {
            return Err(Error::invalid("initial energy must be finite and >= 0"));
        }
        if !(self.loss_threshold > 0.0 && self.loss_threshold <= 1.0) {
            return Err(Error::invalid("loss threshold must be in (0, 1]"));
        }
        if !(0.0..1.0).contains(&self.background_loss) {
            return Err(Error::invalid("background loss must be in [0, 1)"));
        }
        if !(self.recovery_bin > 0.0 && self.recovery_duration >= 10.0 * self.recovery_bin) {
            return Err(Error::invalid("recovery trace needs at least 10 bins"));
        }
        Ok(())
    }
}

/// Result of one attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceOutcome {
    /// Neither the loss proxy nor the background channel removed the ion.
    pub survived: bool,
    /// The trajectory left the well in the integrator.
    pub escaped: bool,
    /// Motional energy in the loading well after the sequence in eV,
    /// including heating over the sequence.
    pub e_final: f64,
    /// Largest potential energy above the instantaneous minimum in eV.
    pub e_max: f64,
    pub max_excursion: f64,
    /// Fluorescence during recooling; `None` for a lost ion.
    pub trace: Option<FluorescenceTrace>,
}

/// Waveform and well data shared by all trials of one specification.
#[derive(Debug, Clone)]
pub struct PreparedSequence {
    pub spec: SequenceSpec,
    pub waveform: VoltageWaveform,
    pub load_minimum: f64,
    /// Small-oscillation frequency of the loading well in rad/s.
    pub load_omega: f64,
    /// Lowest axial depth of the transport wells in eV.
    pub transport_depth: f64,
    /// Total duration of the sequence including the settling time in s.
    pub duration: f64,
}

impl PreparedSequence {
    pub fn new(basis: &AxialBasis, spec: &SequenceSpec) -> Result<Self> {
        spec.validate()?;
        let sp = &spec.species;
        let load = superpose(basis, &spec.load_voltages)?;
        let (lo, hi) = (basis.grid()[0], basis.grid()[basis.grid().len() - 1]);
        let near = |z: f64| ((z - spec.well_window).max(lo), (z + spec.well_window).min(hi));
        let lw = well_analysis(&load, sp, near(0.0), spec.solver.well)?;
        let load_omega = lw.omega_z;

        let origin = lw.z_min + spec.morph_offset;
        let transport = generate_waveform(basis, &spec.ramp, &spec.solver, sp, spec.dac.as_ref(), origin)?;
        let transport_depth = transport
            .steps()
            .par_iter()
            .enumerate()
            .map(|(k, row)| {
                let p = superpose(basis, row)?;
                let z0 = origin + spec.ramp.held_position(k);
                Ok(well_analysis(&p, sp, near(z0), WellOptions::default())?.axial_depth)
            })
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(f64::INFINITY, f64::min);

        let start = transport.row(0).to_vec();
        let last = transport.row(transport.len() - 1).to_vec();
        let morph_in = morph(&spec.load_voltages, &start, spec.morph_steps, spec.morph_dt)?;
        let morph_out = morph(&last, &spec.load_voltages, spec.morph_steps, spec.morph_dt)?;

        let mut times = morph_in.times().to_vec();
        let mut rows = morph_in.steps().to_vec();
        let t0 = morph_in.end() + spec.delay;
        let duration = spec.ramp.duration;
        if spec.mode == TransportMode::Ramp {
            for k in 1..transport.len() {
                times.push(t0 + transport.times()[k]);
                rows.push(transport.row(k).to_vec());
            }
        }
        let t1 = t0 + duration + spec.delay_after;
        for k in 1..morph_out.len() {
            times.push(t1 + morph_out.times()[k]);
            rows.push(morph_out.row(k).to_vec());
        }
        let mut waveform = VoltageWaveform::new(times, rows, spec.ramp.dt_update)?;
        if let Some(dac) = &spec.dac {
            waveform = quantize(&waveform, dac)?;
        }
        let duration = waveform.end() + spec.settle;
        Ok(Self {
            spec: spec.clone(),
            waveform,
            load_minimum: lw.z_min,
            load_omega,
            transport_depth,
            duration,
        })
    }

    /// Runs trial `index` with its own random stream.
    pub fn run_trial(&self, basis: &AxialBasis, index: u64) -> Result<SequenceOutcome> {
        self.trial(basis, index, true)
    }

    pub(crate) fn trial(&self, basis: &AxialBasis, index: u64, with_trace: bool) -> Result<SequenceOutcome> {
        let spec = &self.spec;
        let mut rng = trial_rng(spec.seed, index);
        // coherent motion with a random phase
        let e0 = ev_to_joule(spec.initial_energy.unwrap_or_else(|| doppler_limit_energy(&spec.cooling)));
        let amp = (2.0 * e0 / (spec.species.mass * self.load_omega.powi(2))).sqrt();
        let phase = rng.random_range(0.0..2.0 * PI);
        let initial = IonState {
            z: self.load_minimum + amp * phase.cos(),
            v: -amp * self.load_omega * phase.sin(),
            t: 0.0,
        };
        let traj = integrate_full(basis, &self.waveform, &spec.species, initial, spec.dt_int, spec.settle)?;
        let summary: TransportResult = traj.summary();
        let background = rng.random::<f64>() < spec.background_loss;
        let proxy_loss = classify_loss(&summary, self.transport_depth, spec.loss_threshold);
        let survived = !proxy_loss && !background;

        let e_final = if summary.lost {
            f64::INFINITY
        } else {
            apply_heating(summary.e_final, &spec.heating, self.duration, Some(&mut rng))?
        };
        let trace = if survived && with_trace {
            Some(simulate_recovery(
                e_final,
                &spec.cooling,
                self.load_omega,
                &spec.species,
                spec.recovery_duration,
                spec.recovery_bin,
            )?)
        } else {
            None
        };
        Ok(SequenceOutcome {
            survived,
            escaped: summary.lost,
            e_final,
            e_max: summary.e_max,
            max_excursion: summary.max_excursion,
            trace,
        })
    }
}

/// Prepares and runs the first trial of `spec`.
pub fn run_sequence(basis: &AxialBasis, spec: &SequenceSpec) -> Result<SequenceOutcome> {
    PreparedSequence::new(basis, spec)?.run_trial(basis, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trap_model::{analytic_basis, default_grid, TrapGeometry};

    fn basis() -> AxialBasis {
        let g = TrapGeometry::standard();
        analytic_basis(&g, 1e-3, &default_grid(&g)).unwrap()
    }

    fn quick(tau: f64) -> SequenceSpec {
        SequenceSpec {
            ramp: RampSpec::from_tau(tau, 2.0).unwrap(),
            recovery_duration: 1e-3,
            recovery_bin: 1e-5,
            ..SequenceSpec::default()
        }
    }

    #[test]
    fn timeline_layout() {
        let b = basis();
        let spec = SequenceSpec { delay: 2e-6, ..quick(4.0) };
        let p = PreparedSequence::new(&b, &spec).unwrap();
        let w = &p.waveform;
        // 11 morph rows, 20 further ramp rows, 10 morph-back rows
        assert_eq!(w.len(), 11 + 20 + 10);
        assert!((w.times()[11] - 13e-6).abs() < 1e-15);
        assert!((w.end() - 42e-6).abs() < 1e-15);
        assert_eq!(w.row(0), w.row(w.len() - 1));
        assert!(w.quantized);
        assert!(p.transport_depth > 0.5);

        let wait = PreparedSequence::new(&b, &SequenceSpec { mode: TransportMode::Wait, ..spec }).unwrap();
        assert_eq!(wait.waveform.len(), 21);
        assert!((wait.waveform.end() - w.end()).abs() < 1e-15);
    }

    #[test]
    fn deterministic_outcome() {
        let b = basis();
        let spec = quick(4.0);
        let a = run_sequence(&b, &spec).unwrap();
        let c = run_sequence(&b, &spec).unwrap();
        assert_eq!(a, c);
        assert!(a.survived);
        assert!(a.trace.is_some());
    }

    #[test]
    fn matched_morph_barely_excites() {
        let b = basis();
        let spec = SequenceSpec {
            mode: TransportMode::Wait,
            initial_energy: Some(0.0),
            heating: HeatingModel { rate: 0.0, ..HeatingModel::default() },
            ..quick(4.0)
        };
        let out = run_sequence(&b, &spec).unwrap();
        assert!(out.e_final < 1e-9, "{}", out.e_final);
        let kicked = run_sequence(&b, &SequenceSpec { morph_offset: 3e-6, ..spec }).unwrap();
        assert!(kicked.e_final > 10.0 * out.e_final, "{} vs {}", kicked.e_final, out.e_final);
    }

    #[test]
    fn background_channel_removes_ions() {
        let b = basis();
        let spec = SequenceSpec { background_loss: 0.999_999, ..quick(4.0) };
        let out = run_sequence(&b, &spec).unwrap();
        assert!(!out.survived && !out.escaped);
        assert!(out.trace.is_none());
    }

    #[test]
    fn invalid_sequences_are_rejected() {
        let b = basis();
        let bad = SequenceSpec { loss_threshold: 0.0, ..quick(4.0) };
        assert!(PreparedSequence::new(&b, &bad).is_err());
        let short = SequenceSpec { load_voltages: vec![1.0; 3], ..quick(4.0) };
        assert!(PreparedSequence::new(&b, &short).is_err());
    }
}
