//! TOML run configuration. Every physical key carries its unit in the name;
//! unknown keys are rejected.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use shuttle_core::constants::{angular, joule_to_ev, ATOMIC_MASS_UNIT, ELEMENTARY_CHARGE, HBAR};
use shuttle_core::cooling::{HeatingModel, LaserParams, ParameterUncertainty, STEADY_STATE_COUNT_RATE};
use shuttle_core::experiment::{SequenceSpec, TransportMode};
use shuttle_core::micromotion::Fold;
use shuttle_core::trap_model::{analytic_basis, default_grid, AxialBasis, IonSpecies, RadialParams, TrapGeometry, WellOptions};
use shuttle_core::waveform::{DacSpec, RampSpec, SolverConfig};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub geometry: GeometryConfig,
    pub ion: IonConfig,
    pub drive: DriveConfig,
    pub dac: DacConfig,
    pub solver: SolverSection,
    pub ramp: RampConfig,
    pub sequence: SequenceConfig,
    pub laser: LaserConfig,
    pub uncertainty: UncertaintyConfig,
    pub heating: HeatingConfig,
    pub micromotion: MicromotionConfig,
    pub run: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub gap_distance_mm: f64,
    /// Tabulated basis replacing the analytic surrogate.
    pub basis_file: Option<PathBuf>,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self { gap_distance_mm: 1.0, basis_file: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IonConfig {
    pub mass_amu: f64,
    pub charge_e: f64,
}

impl Default for IonConfig {
    fn default() -> Self {
        Self { mass_amu: 40.0, charge_e: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriveConfig {
    pub freq_mhz: f64,
    pub v_pp_v: f64,
    pub kappa: f64,
    pub r0_mm: f64,
}

impl Default for DriveConfig {
    fn default() -> Self {
        Self {
            freq_mhz: 11.81,
            v_pp_v: 408.0,
            kappa: 0.90,
            r0_mm: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DacConfig {
    pub enabled: bool,
    pub bits: u32,
    pub full_scale_v: f64,
    pub update_rate_mhz: f64,
}

impl Default for DacConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            bits: 16,
            full_scale_v: 10.0,
            update_rate_mhz: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub lambda_per_v2: f64,
    pub v_min_v: f64,
    pub v_max_v: f64,
    pub fit_half_window_mm: f64,
    pub fit_samples: usize,
    pub gradient_weight: f64,
    pub omega_tolerance: f64,
    pub position_tolerance_um: f64,
    pub well_fit_half_width_mm: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            lambda_per_v2: 1e-9,
            v_min_v: -10.0,
            v_max_v: 10.0,
            fit_half_window_mm: 0.75,
            fit_samples: 61,
            gradient_weight: 100.0,
            omega_tolerance: 0.01,
            position_tolerance_um: 1.0,
            well_fit_half_width_mm: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RampConfig {
    pub distance_mm: f64,
    pub tau: f64,
    pub sigma: f64,
    pub dt_update_us: f64,
    pub freq_khz: f64,
    /// Start of the ramp; unset means the loading-well minimum.
    pub origin_mm: Option<f64>,
}

impl Default for RampConfig {
    fn default() -> Self {
        Self {
            distance_mm: 2.0,
            tau: 4.0,
            sigma: 2.0,
            dt_update_us: 1.0,
            freq_khz: 200.0,
            origin_mm: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SequenceConfig {
    pub load_voltages_v: Vec<f64>,
    pub morph_steps: usize,
    pub morph_dt_us: f64,
    pub morph_offset_um: f64,
    pub settle_us: f64,
    pub dt_int_ns: f64,
    pub well_window_mm: f64,
    pub loss_threshold: f64,
    /// Per-attempt loss without transport; sweep-tau requires it.
    pub background_loss: Option<f64>,
    /// Unset starts at the Doppler limit.
    pub initial_energy_mev: Option<f64>,
    pub recovery_duration_ms: f64,
    pub recovery_bin_us: f64,
}

impl Default for SequenceConfig {
    fn default() -> Self {
        Self {
            load_voltages_v: SequenceSpec::default().load_voltages,
            morph_steps: 10,
            morph_dt_us: 1.0,
            morph_offset_um: 0.0,
            settle_us: 20.0,
            dt_int_ns: 10.0,
            well_window_mm: 1.0,
            loss_threshold: 0.30,
            background_loss: None,
            initial_energy_mev: None,
            recovery_duration_ms: 200.0,
            recovery_bin_us: 500.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LaserConfig {
    pub wavelength_nm: f64,
    pub linewidth_mhz: f64,
    pub detuning_mhz: f64,
    pub s0: f64,
    pub waist_um: f64,
    pub k_axial: f64,
    /// Unset calibrates the efficiency to `count_rate_khz` for an ion at rest.
    pub detection_efficiency: Option<f64>,
    pub count_rate_khz: f64,
}

impl Default for LaserConfig {
    fn default() -> Self {
        Self {
            wavelength_nm: 397.0,
            linewidth_mhz: 21.6,
            detuning_mhz: -10.8,
            s0: 1.0,
            waist_um: 60.0,
            k_axial: std::f64::consts::FRAC_1_SQRT_2,
            detection_efficiency: None,
            count_rate_khz: STEADY_STATE_COUNT_RATE * 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UncertaintyConfig {
    pub waist_um: f64,
    pub s0_relative: f64,
    pub detuning_mhz: f64,
}

impl Default for UncertaintyConfig {
    fn default() -> Self {
        Self {
            waist_um: 10.0,
            s0_relative: 0.15,
            detuning_mhz: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeatingConfig {
    pub rate_mev_per_s: f64,
    /// Unset uses one motional quantum of the ramp frequency.
    pub quantum_mev: Option<f64>,
}

impl Default for HeatingConfig {
    fn default() -> Self {
        Self {
            rate_mev_per_s: 3.0,
            quantum_mev: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FoldConfig {
    #[default]
    OnePeriod,
    TwoPeriods,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MicromotionConfig {
    pub bins: usize,
    pub fold: FoldConfig,
}

impl Default for MicromotionConfig {
    fn default() -> Self {
        Self { bins: 32, fold: FoldConfig::OnePeriod }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub trials: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { seed: 1, trials: 20 }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                Self::from_toml(&text).with_context(|| format!("in config {}", p.display()))
            }
        }
    }

    /// SHA-256 over the canonical TOML of the resolved configuration.
    pub fn hash(&self) -> String {
        let canonical = toml::to_string(self).expect("config serialises");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn species(&self) -> Result<IonSpecies> {
        Ok(IonSpecies::new(
            self.ion.mass_amu * ATOMIC_MASS_UNIT,
            self.ion.charge_e * ELEMENTARY_CHARGE,
            format!("m={}u", self.ion.mass_amu),
        )?)
    }

    pub fn basis(&self) -> Result<AxialBasis> {
        match &self.geometry.basis_file {
            Some(p) => AxialBasis::read_file(p).with_context(|| format!("reading basis {}", p.display())),
            None => {
                let g = TrapGeometry::standard();
                Ok(analytic_basis(&g, self.geometry.gap_distance_mm * 1e-3, &default_grid(&g))?)
            }
        }
    }

    pub fn radial(&self) -> RadialParams {
        RadialParams {
            drive_frequency: angular(self.drive.freq_mhz * 1e6),
            v_pp: self.drive.v_pp_v,
            kappa: self.drive.kappa,
            r0: self.drive.r0_mm * 1e-3,
        }
    }

    pub fn dac(&self) -> Option<DacSpec> {
        self.dac.enabled.then_some(DacSpec {
            bits: self.dac.bits,
            full_scale: self.dac.full_scale_v,
            update_rate: self.dac.update_rate_mhz * 1e6,
        })
    }

    pub fn solver(&self) -> SolverConfig {
        let s = &self.solver;
        SolverConfig {
            lambda: s.lambda_per_v2,
            v_min: s.v_min_v,
            v_max: s.v_max_v,
            fit_half_window: s.fit_half_window_mm * 1e-3,
            fit_samples: s.fit_samples,
            gradient_weight: s.gradient_weight,
            omega_tolerance: s.omega_tolerance,
            position_tolerance: s.position_tolerance_um * 1e-6,
            well: self.well_options(),
        }
    }

    pub fn well_options(&self) -> WellOptions {
        WellOptions { fit_half_width: self.solver.well_fit_half_width_mm * 1e-3 }
    }

    pub fn ramp(&self) -> Result<RampSpec> {
        let r = &self.ramp;
        let omega = angular(r.freq_khz * 1e3);
        let duration = r.tau * 2.0 * std::f64::consts::PI / omega;
        Ok(RampSpec::new(r.distance_mm * 1e-3, duration, r.sigma, r.dt_update_us * 1e-6, omega)?)
    }

    pub fn laser(&self) -> Result<LaserParams> {
        let l = &self.laser;
        let mut laser = LaserParams {
            wavelength: l.wavelength_nm * 1e-9,
            gamma: angular(l.linewidth_mhz * 1e6),
            detuning: angular(l.detuning_mhz * 1e6),
            s0: l.s0,
            w0: l.waist_um * 1e-6,
            k_axial: l.k_axial,
            detection_efficiency: 1.0,
        };
        laser.detection_efficiency = match l.detection_efficiency {
            Some(eta) => eta,
            None => laser.efficiency_for_rate(l.count_rate_khz * 1e3),
        };
        laser.validate()?;
        Ok(laser)
    }

    pub fn uncertainty(&self) -> ParameterUncertainty {
        ParameterUncertainty {
            w0: self.uncertainty.waist_um * 1e-6,
            s0_relative: self.uncertainty.s0_relative,
            detuning: angular(self.uncertainty.detuning_mhz * 1e6),
        }
    }

    pub fn heating(&self) -> HeatingModel {
        let quantum = match self.heating.quantum_mev {
            Some(q) => q * 1e-3,
            None => joule_to_ev(HBAR * angular(self.ramp.freq_khz * 1e3)),
        };
        HeatingModel { rate: self.heating.rate_mev_per_s * 1e-3, quantum }
    }

    pub fn fold(&self) -> Fold {
        match self.micromotion.fold {
            FoldConfig::OnePeriod => Fold::OnePeriod,
            FoldConfig::TwoPeriods => Fold::TwoPeriods,
        }
    }

    /// Sequence specification; the background loss defaults to zero here
    /// and is checked by the commands that need it.
    pub fn sequence(&self) -> Result<SequenceSpec> {
        let s = &self.sequence;
        if let Some(b) = s.background_loss {
            if !(0.0..1.0).contains(&b) {
                bail!(crate::InputError(format!("sequence.background_loss must be in [0, 1), got {b}")));
            }
        }
        Ok(SequenceSpec {
            species: self.species()?,
            load_voltages: s.load_voltages_v.clone(),
            ramp: self.ramp()?,
            solver: self.solver(),
            dac: self.dac(),
            mode: TransportMode::Ramp,
            morph_steps: s.morph_steps,
            morph_dt: s.morph_dt_us * 1e-6,
            morph_offset: s.morph_offset_um * 1e-6,
            delay: 0.0,
            delay_after: 0.0,
            settle: s.settle_us * 1e-6,
            dt_int: s.dt_int_ns * 1e-9,
            well_window: s.well_window_mm * 1e-3,
            initial_energy: s.initial_energy_mev.map(|e| e * 1e-3),
            loss_threshold: s.loss_threshold,
            background_loss: s.background_loss.unwrap_or(0.0),
            cooling: self.laser()?,
            heating: self.heating(),
            recovery_duration: s.recovery_duration_ms * 1e-3,
            recovery_bin: s.recovery_bin_us * 1e-6,
            seed: self.run.seed,
        })
    }
}
