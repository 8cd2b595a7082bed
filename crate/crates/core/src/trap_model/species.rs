use crate::constants::{ATOMIC_MASS_UNIT, ELEMENTARY_CHARGE};
use crate::{Error, Result};

/// Ion mass and charge. The charge is called `charge` (Q) throughout to keep
/// it apart from the Mathieu parameter q.
#[derive(Debug, Clone, PartialEq)]
pub struct IonSpecies {
    pub mass: f64,
    pub charge: f64,
    pub label: String,
}

impl IonSpecies {
    pub fn new(mass: f64, charge: f64, label: impl Into<String>) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::invalid(format!("ion mass must be > 0, got {mass}")));
        }
        if !(charge > 0.0 && charge.is_finite()) {
            return Err(Error::invalid(format!("ion charge must be > 0, got {charge}")));
        }
        Ok(Self {
            mass,
            charge,
            label: label.into(),
        })
    }

    /// Singly charged 40Ca+ with m = 40 u.
    pub fn calcium40() -> Self {
        Self {
            mass: 40.0 * ATOMIC_MASS_UNIT,
            charge: ELEMENTARY_CHARGE,
            label: "40Ca+".into(),
        }
    }

    /// Charge-to-mass ratio Q/m.
    pub fn q_over_m(&self) -> f64 {
        self.charge / self.mass
    }

    /// Potential curvature (V/m^2) giving secular frequency `omega`.
    pub fn curvature_for(&self, omega: f64) -> f64 {
        self.mass * omega * omega / self.charge
    }

    /// Converts a potential difference in volt to an energy in eV.
    pub fn volts_to_ev(&self, dv: f64) -> f64 {
        dv * self.charge / ELEMENTARY_CHARGE
    }
}

impl Default for IonSpecies {
    fn default() -> Self {
        Self::calcium40()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nonpositive() {
        assert!(IonSpecies::new(0.0, 1.0, "x").is_err());
        assert!(IonSpecies::new(1.0, -1.0, "x").is_err());
    }

    #[test]
    fn curvature_round_trip() {
        let ca = IonSpecies::calcium40();
        let w = 2.0 * std::f64::consts::PI * 200e3;
        let k = ca.curvature_for(w);
        assert!(((ca.q_over_m() * k).sqrt() / w - 1.0).abs() < 1e-15);
    }
}
