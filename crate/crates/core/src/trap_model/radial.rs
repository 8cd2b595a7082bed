use std::f64::consts::SQRT_2;

use super::species::IonSpecies;
use crate::{Error, Result};

/// RF drive and electrode parameters of the radial quadrupole.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialParams {
    /// Drive angular frequency Omega in rad/s.
    pub drive_frequency: f64,
    /// Peak-to-peak RF voltage; formulas use the amplitude v_pp / 2.
    pub v_pp: f64,
    /// Geometric efficiency of the blade quadrupole relative to hyperbolic
    /// electrodes, 0 < kappa <= 1.
    pub kappa: f64,
    /// Ion-electrode distance in m.
    pub r0: f64,
}

impl Default for RadialParams {
    fn default() -> Self {
        Self {
            drive_frequency: crate::constants::angular(11.81e6),
            v_pp: 408.0,
            kappa: 0.90,
            r0: 1.0e-3,
        }
    }
}

/// Ideal-quadrupole radial characterisation. The depth is the lowest-order
/// pseudopotential estimate, not the depth along the blade diagonals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialCharacterization {
    pub params: RadialParams,
    pub mathieu_q: f64,
    /// Secular radial frequency q Omega / (2 sqrt 2) in rad/s.
    pub omega_rad: f64,
    /// q V0 / 8 expressed in eV.
    pub ideal_depth: f64,
}

impl RadialParams {
    fn validate(&self) -> Result<()> {
        let ok = [self.drive_frequency, self.v_pp, self.r0]
            .iter()
            .all(|v| *v > 0.0 && v.is_finite());
        if !ok {
            return Err(Error::invalid("drive frequency, v_pp and r0 must be positive"));
        }
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return Err(Error::invalid(format!("kappa must lie in (0, 1], got {}", self.kappa)));
        }
        Ok(())
    }
}

/// q = 2 Q V0 kappa / (m r0^2 Omega^2) with V0 = v_pp / 2.
pub fn mathieu_q(params: RadialParams, species: &IonSpecies) -> Result<RadialCharacterization> {
    params.validate()?;
    let v0 = params.v_pp / 2.0;
    let omega = params.drive_frequency;
    let q = 2.0 * species.charge * v0 * params.kappa
        / (species.mass * params.r0 * params.r0 * omega * omega);
    if q >= 0.9 {
        return Err(Error::invalid(format!(
            "Mathieu q = {q:.3} is outside the lowest stability region"
        )));
    }
    Ok(RadialCharacterization {
        params,
        mathieu_q: q,
        omega_rad: q * omega / (2.0 * SQRT_2),
        ideal_depth: species.volts_to_ev(q * v0 / 8.0),
    })
}

/// Geometric efficiency that yields `target_q` for the given drive.
pub fn calibrate_kappa(target_q: f64, params: RadialParams, species: &IonSpecies) -> Result<f64> {
    let unit = mathieu_q(RadialParams { kappa: 1.0, ..params }, species)?;
    let kappa = target_q / unit.mathieu_q;
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(Error::invalid(format!(
            "target q = {target_q} needs kappa = {kappa:.3}, outside (0, 1]"
        )));
    }
    Ok(kappa)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn homogeneity() {
        let ca = IonSpecies::calcium40();
        let p = RadialParams::default();
        let q = mathieu_q(p, &ca).unwrap().mathieu_q;
        let q2 = mathieu_q(RadialParams { v_pp: 2.0 * p.v_pp, ..p }, &ca).unwrap().mathieu_q;
        let q4 = mathieu_q(RadialParams { drive_frequency: 2.0 * p.drive_frequency, ..p }, &ca)
            .unwrap()
            .mathieu_q;
        assert!((q2 / q - 2.0).abs() < 1e-14);
        assert!((q / q4 - 4.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_kappa() {
        let ca = IonSpecies::calcium40();
        assert!(mathieu_q(RadialParams { kappa: 1.2, ..Default::default() }, &ca).is_err());
        assert!(mathieu_q(RadialParams { v_pp: -1.0, ..Default::default() }, &ca).is_err());
    }

    #[test]
    fn kappa_calibration_inverts() {
        let ca = IonSpecies::calcium40();
        let p = RadialParams::default();
        let k = calibrate_kappa(0.16, p, &ca).unwrap();
        let q = mathieu_q(RadialParams { kappa: k, ..p }, &ca).unwrap().mathieu_q;
        assert!((q - 0.16).abs() < 1e-14);
        assert!((k - 0.90).abs() < 0.01);
    }
}
