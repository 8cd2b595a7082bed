use super::recovery::RecoveryCurve;
use super::{FluorescenceTrace, LaserParams};
use crate::constants::{angular, ev_to_joule};
use crate::trap_model::IonSpecies;
use crate::{Error, Result};

/// One-sigma uncertainties of the laser parameters entering the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterUncertainty {
    /// Beam waist in m.
    pub w0: f64,
    /// Relative uncertainty of the saturation parameter.
    pub s0_relative: f64,
    /// Detuning in rad/s.
    pub detuning: f64,
}

impl Default for ParameterUncertainty {
    fn default() -> Self {
        Self {
            w0: 10e-6,
            s0_relative: 0.15,
            detuning: angular(30e6),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyEstimate {
    /// Excitation energy above the cooling equilibrium in eV.
    pub e0: f64,
    /// Combined one-sigma uncertainty in eV.
    pub uncertainty: f64,
    /// Contributions of waist, saturation and detuning in eV.
    pub contributions: [f64; 3],
}

impl EnergyEstimate {
    pub fn relative_uncertainty(&self) -> f64 {
        self.uncertainty / self.e0
    }
}

/// Fraction of each stated uncertainty used as the finite-difference step.
const STEP_FRACTION: f64 = 0.1;

fn model_time(e0: f64, laser: &LaserParams, omega_z: f64, mass: f64, bin: f64, t_max: f64) -> Result<Option<f64>> {
    let curve = RecoveryCurve::new(ev_to_joule(e0), laser, omega_z, mass, t_max)?;
    Ok(curve.crossing(bin, t_max))
}

/// Excitation energy (eV) whose model recovery time with bins of width
/// `bin` equals `t_recover`, by bisection in log energy.
pub fn invert_recovery_time(
    t_recover: f64,
    laser: &LaserParams,
    omega_z: f64,
    species: &IonSpecies,
    bin: f64,
) -> Result<f64> {
    laser.validate()?;
    if !(t_recover > 0.0 && t_recover.is_finite()) {
        return Err(Error::Estimation(format!(
            "recovery time {t_recover} s is not resolved; the excitation is below the bin resolution"
        )));
    }
    if !(omega_z > 0.0 && bin > 0.0) {
        return Err(Error::invalid("need omega_z > 0 and bin > 0"));
    }
    let m = species.mass;
    let t_max = 1.5 * t_recover + 2.0 * bin;
    let later = |e: f64| -> Result<bool> {
        Ok(model_time(e, laser, omega_z, m, bin, t_max)?.is_none_or(|t| t > t_recover))
    };

    let mut lo = 1e-9;
    if later(lo)? {
        return Err(Error::Estimation(format!(
            "recovery time {t_recover} s is shorter than the model allows"
        )));
    }
    let mut hi = 1e-3;
    while !later(hi)? {
        lo = hi;
        hi *= 4.0;
        if hi > 10.0 {
            return Err(Error::Estimation(format!(
                "recovery time {t_recover} s needs more than 10 eV"
            )));
        }
    }
    while hi / lo - 1.0 > 1e-8 {
        let mid = (lo * hi).sqrt();
        if later(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((lo * hi).sqrt())
}

/// Estimates the excitation energy from the recovery time of a trace with
/// the default parameter uncertainties.
pub fn estimate_energy(
    trace: &FluorescenceTrace,
    laser: &LaserParams,
    omega_z: f64,
    species: &IonSpecies,
) -> Result<EnergyEstimate> {
    estimate_energy_with(trace, laser, omega_z, species, &ParameterUncertainty::default())
}

/// Estimate with linearised propagation of the laser parameter
/// uncertainties, combined in quadrature.
pub fn estimate_energy_with(
    trace: &FluorescenceTrace,
    laser: &LaserParams,
    omega_z: f64,
    species: &IonSpecies,
    uncertainty: &ParameterUncertainty,
) -> Result<EnergyEstimate> {
    let t = trace
        .t_recover
        .ok_or_else(|| Error::Estimation("trace does not recover to its steady state".into()))?;
    let invert = |l: &LaserParams| invert_recovery_time(t, l, omega_z, species, trace.bin);
    let e0 = invert(laser)?;

    let f = STEP_FRACTION;
    let shifts: [(LaserParams, LaserParams); 3] = [
        (
            LaserParams { w0: laser.w0 + f * uncertainty.w0, ..*laser },
            LaserParams { w0: laser.w0 - f * uncertainty.w0, ..*laser },
        ),
        (
            LaserParams { s0: laser.s0 * (1.0 + f * uncertainty.s0_relative), ..*laser },
            LaserParams { s0: laser.s0 * (1.0 - f * uncertainty.s0_relative), ..*laser },
        ),
        (
            LaserParams { detuning: laser.detuning + f * uncertainty.detuning, ..*laser },
            LaserParams { detuning: laser.detuning - f * uncertainty.detuning, ..*laser },
        ),
    ];
    let mut contributions = [0.0; 3];
    for (c, (up, down)) in contributions.iter_mut().zip(&shifts) {
        *c = ((invert(up)? - invert(down)?) / (2.0 * f)).abs();
    }
    let total = contributions.iter().map(|c| c * c).sum::<f64>().sqrt();
    Ok(EnergyEstimate {
        e0,
        uncertainty: total,
        contributions,
    })
}
