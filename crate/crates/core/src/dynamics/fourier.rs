use std::f64::consts::PI;

use quadrature::double_exponential;

use crate::constants::joule_to_ev;
use crate::trap_model::IonSpecies;
use crate::waveform::{ramp_velocity, RampSpec};
use crate::Result;

/// Energy (J) left in an oscillator of frequency `omega` that starts at rest
/// in a well whose centre moves with `velocity` over `[t0, t1]` and is at
/// rest afterwards: `(m omega^2 / 2) |int z0'(t) exp(-i omega t) dt|^2`.
///
/// The integral is split into pieces of a quarter period and each piece is
/// evaluated by double-exponential quadrature.
pub fn fourier_energy(velocity: impl Fn(f64) -> f64, t0: f64, t1: f64, omega: f64, mass: f64) -> f64 {
    let (re, im) = complex_integral(&velocity, t0, t1, omega);
    0.5 * mass * omega * omega * (re * re + im * im)
}

/// Final excitation (eV) after the continuous round-trip ramp, from rest.
pub fn fourier_energy_oracle(spec: &RampSpec, species: &IonSpecies) -> Result<f64> {
    spec.validate()?;
    let half = 0.5 * spec.duration;
    let omega = spec.omega_target;
    let v = |t: f64| ramp_velocity(spec, t).unwrap_or(0.0);
    // the velocity jumps sign at the turning point, so integrate the halves apart
    let (out_re, out_im) = complex_integral(&v, 0.0, half, omega);
    let (back_re, back_im) = complex_integral(&v, half, spec.duration, omega);
    let (re, im) = (out_re + back_re, out_im + back_im);
    Ok(joule_to_ev(0.5 * species.mass * omega * omega * (re * re + im * im)))
}

/// `int_{t0}^{t1} f(t) exp(-i omega t) dt` as (re, im), in quarter-period pieces.
fn complex_integral(velocity: &impl Fn(f64) -> f64, t0: f64, t1: f64, omega: f64) -> (f64, f64) {
    let quarter = 0.5 * PI / omega;
    let pieces = ((t1 - t0) / quarter).ceil().max(1.0) as usize;
    let h = (t1 - t0) / pieces as f64;
    let (mut re, mut im) = (0.0, 0.0);
    for j in 0..pieces {
        let a = t0 + j as f64 * h;
        let b = if j + 1 == pieces { t1 } else { a + h };
        re += double_exponential::integrate(|t| velocity(t) * (omega * t).cos(), a, b, 1e-16).integral;
        im -= double_exponential::integrate(|t| velocity(t) * (omega * t).sin(), a, b, 1e-16).integral;
    }
    (re, im)
}

/// Exact excitation (eV) of the zero-order-hold ramp: each update moves the
/// centre by a jump `dz_k` at `t_k`, so the integral becomes
/// `sum_k dz_k exp(-i omega t_k)`.
pub fn held_ramp_energy(spec: &RampSpec, species: &IonSpecies) -> f64 {
    let omega = spec.omega_target;
    let (mut re, mut im) = (0.0, 0.0);
    let mut prev = spec.held_position(0);
    for k in 1..=spec.update_count() {
        let z = spec.held_position(k);
        let t = spec.update_time(k);
        re += (z - prev) * (omega * t).cos();
        im -= (z - prev) * (omega * t).sin();
        prev = z;
    }
    joule_to_ev(0.5 * species.mass * omega * omega * (re * re + im * im))
}
