//! Physical constants (CODATA 2018, SI units).

use std::f64::consts::PI;

/// Elementary charge in C.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Atomic mass unit in kg.
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
/// Reduced Planck constant in J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Vacuum permittivity in F/m.
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;

/// Coulomb constant 1/(4 pi eps0) in N m^2 / C^2.
pub fn coulomb_constant() -> f64 {
    1.0 / (4.0 * PI * EPSILON_0)
}

/// Converts an energy in joule to electronvolt.
pub fn joule_to_ev(e: f64) -> f64 {
    e / ELEMENTARY_CHARGE
}

/// Converts an energy in electronvolt to joule.
pub fn ev_to_joule(e: f64) -> f64 {
    e * ELEMENTARY_CHARGE
}

/// Angular frequency from a frequency in Hz.
pub fn angular(freq_hz: f64) -> f64 {
    2.0 * PI * freq_hz
}
