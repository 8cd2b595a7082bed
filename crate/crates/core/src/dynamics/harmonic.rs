use std::f64::consts::PI;

use super::{IonState, Trajectory};
use crate::trap_model::IonSpecies;
use crate::waveform::{ramp_position, RampSpec};
use crate::{Error, Result};

/// How the ideal well follows the ramp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Schedule {
    /// Minimum latched at every DAC update, as the hardware does.
    #[default]
    ZeroOrderHold,
    /// Minimum follows z0(t) exactly.
    Continuous,
}

/// Velocity-Verlet integration of `z'' = -omega^2 (z - c(k, t))` across the
/// intervals `[breaks[k], breaks[k+1]]`.
///
/// `centre(k, t)` is the well centre during interval `k`; `centre(n, t_end)`
/// with `n = breaks.len() - 1` is the centre after the last break and sets
/// the reference for the final sample. Every interval is divided into equal
/// sub-steps no longer than `dt_int`, so steps never straddle a break.
pub fn integrate_moving_well(
    centre: impl Fn(usize, f64) -> f64,
    omega: f64,
    species: &IonSpecies,
    initial: IonState,
    breaks: &[f64],
    dt_int: f64,
) -> Result<Trajectory> {
    if breaks.len() < 2 || breaks.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("integration breaks must be strictly increasing"));
    }
    if !(dt_int > 0.0 && omega > 0.0) {
        return Err(Error::invalid("dt_int and omega must be > 0"));
    }
    if !(initial.z.is_finite() && initial.v.is_finite()) {
        return Err(Error::invalid("initial state must be finite"));
    }
    let m = species.mass;
    let w2 = omega * omega;
    let energy = |z: f64, v: f64, c: f64| (0.5 * m * v * v, 0.5 * m * w2 * (z - c).powi(2));
    // blow-up threshold: 1e6 times the energy of the largest natural displacement
    let c0 = centre(0, breaks[0]);
    let reach = (0..breaks.len())
        .map(|k| (centre(k, breaks[k]) - c0).abs())
        .fold((initial.z - c0).abs() + initial.v.abs() / omega, f64::max)
        .max(1e-6);
    let scale = 1e6 * 0.5 * m * w2 * reach * reach;

    let mut traj = Trajectory::default();
    let (mut z, mut v) = (initial.z, initial.v);
    let (k0, p0) = energy(z, v, c0);
    traj.push(IonState { z, v, t: breaks[0] }, k0, p0, c0);

    let intervals = breaks.len() - 1;
    for k in 0..intervals {
        let (a, b) = (breaks[k], breaks[k + 1]);
        let steps = ((b - a) / dt_int * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let h = (b - a) / steps as f64;
        let mut acc = -w2 * (z - centre(k, a));
        for j in 0..steps {
            let t1 = if j + 1 == steps { b } else { a + (j + 1) as f64 * h };
            let vh = v + 0.5 * h * acc;
            z += h * vh;
            acc = -w2 * (z - centre(k, t1));
            v = vh + 0.5 * h * acc;

            let c = if j + 1 == steps { centre(k + 1, t1) } else { centre(k, t1) };
            let (ke, pe) = energy(z, v, c);
            if !(ke + pe).is_finite() || ke + pe > scale {
                return Err(Error::Integration {
                    t: t1,
                    reason: "energy blow-up; reduce dt_int".into(),
                });
            }
            traj.push(IonState { z, v, t: t1 }, ke, pe, c);
        }
    }
    Ok(traj)
}

/// Ion in the ideal harmonic well of frequency `spec.omega_target` that
/// follows the round-trip ramp, starting at `initial.t`.
///
/// Requires `dt_int <= dt_update / 20` and `dt_int <= period / 100`.
pub fn integrate_harmonic(
    spec: &RampSpec,
    species: &IonSpecies,
    initial: IonState,
    dt_int: f64,
    schedule: Schedule,
) -> Result<Trajectory> {
    spec.validate()?;
    let period = 2.0 * PI / spec.omega_target;
    let limit = (spec.dt_update / 20.0).min(period / 100.0);
    if !(dt_int > 0.0 && dt_int <= limit * (1.0 + 1e-9)) {
        return Err(Error::invalid(format!(
            "dt_int = {dt_int:e} s exceeds the stability limit {limit:e} s"
        )));
    }
    let t0 = initial.t;
    let n = spec.update_count();
    let breaks: Vec<f64> = (0..=n).map(|k| t0 + spec.update_time(k)).collect();
    match schedule {
        Schedule::ZeroOrderHold => integrate_moving_well(
            |k, _| spec.held_position(k),
            spec.omega_target,
            species,
            initial,
            &breaks,
            dt_int,
        ),
        Schedule::Continuous => integrate_moving_well(
            |_, t| ramp_position(spec, (t - t0).clamp(0.0, spec.duration)).unwrap_or(0.0),
            spec.omega_target,
            species,
            initial,
            &breaks,
            dt_int,
        ),
    }
}
