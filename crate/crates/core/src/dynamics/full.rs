use rayon::prelude::*;

use super::{IonState, Trajectory};
use crate::trap_model::{descend_to_minimum, superpose, AxialBasis, AxialPotential, IonSpecies};
use crate::waveform::VoltageWaveform;
use crate::{Error, Result};

/// One waveform row: its potential, well minimum and the barrier tops that
/// bound the well on either side.
struct RowWell {
    potential: AxialPotential,
    minimum: f64,
    floor: f64,
    left: f64,
    right: f64,
}

fn barrier_edges(potential: &AxialPotential, z_min: f64) -> (f64, f64) {
    let grid = potential.grid();
    let vals = potential.samples();
    let split = grid.partition_point(|&z| z <= z_min);
    let mut l = split.saturating_sub(1);
    while l > 0 && vals[l - 1] >= vals[l] {
        l -= 1;
    }
    let mut r = split.min(grid.len() - 1);
    while r + 1 < grid.len() && vals[r + 1] >= vals[r] {
        r += 1;
    }
    (grid[l], grid[r])
}

fn row_well(potential: AxialPotential, hint: f64) -> RowWell {
    match descend_to_minimum(&potential, hint) {
        Some(minimum) => {
            let (left, right) = barrier_edges(&potential, minimum);
            let floor = potential.value(minimum);
            RowWell { potential, minimum, floor, left, right }
        }
        None => {
            let grid = potential.grid();
            let (left, right) = (grid[0], grid[grid.len() - 1]);
            let floor = potential.samples().iter().cloned().fold(f64::INFINITY, f64::min);
            RowWell { potential, minimum: f64::NAN, floor, left, right }
        }
    }
}

/// Step fractions of the fourth-order symmetric composition of velocity
/// Verlet (Yoshida 1990).
const YOSHIDA: [f64; 3] = {
    let w1 = 1.351_207_191_959_657_8;
    [w1, 1.0 - 2.0 * w1, w1]
};

/// Integrates `z'' = -(Q/m) d phi(z, t)/dz` with `phi` superposed from the
/// waveform rows under zero-order hold, from the first row time to the last
/// row time plus `tail`, by the fourth-order composition of velocity
/// Verlet with steps no longer than `dt_int` that never straddle a row.
///
/// `initial.t` is replaced by the first row time. Each row's well minimum is
/// found by descending from the previous one. The ion counts as lost as soon
/// as it passes a barrier top of the current well or leaves the grid.
pub fn integrate_full(
    basis: &AxialBasis,
    waveform: &VoltageWaveform,
    species: &IonSpecies,
    initial: IonState,
    dt_int: f64,
    tail: f64,
) -> Result<Trajectory> {
    if waveform.electrode_count() != basis.electrode_count() {
        return Err(Error::invalid(format!(
            "waveform has {} electrodes, basis has {}",
            waveform.electrode_count(),
            basis.electrode_count()
        )));
    }
    if !basis.contains(initial.z) {
        return Err(Error::invalid(format!("initial position {} m outside the basis grid", initial.z)));
    }
    if !(dt_int > 0.0 && tail >= 0.0) {
        return Err(Error::invalid("dt_int must be > 0 and tail >= 0"));
    }
    let potentials = waveform
        .steps()
        .par_iter()
        .map(|row| superpose(basis, row))
        .collect::<Result<Vec<_>>>()?;
    let mut wells = Vec::with_capacity(potentials.len());
    let mut hint = initial.z;
    for p in potentials {
        let w = row_well(p, hint);
        if w.minimum.is_finite() {
            hint = w.minimum;
        }
        wells.push(w);
    }

    let mut breaks = waveform.times().to_vec();
    if tail > 0.0 {
        breaks.push(waveform.end() + tail);
    }
    let qm = species.q_over_m();
    let m = species.mass;
    let charge = species.charge;
    let energy = |w: &RowWell, z: f64, v: f64| (0.5 * m * v * v, charge * (w.potential.value(z) - w.floor));
    let reference = |w: &RowWell| if w.minimum.is_finite() { w.minimum } else { f64::NAN };

    let mut traj = Trajectory::default();
    let (mut z, mut v) = (initial.z, initial.v);
    let (ke, pe) = energy(&wells[0], z, v);
    traj.push(IonState { z, v, t: breaks[0] }, ke, pe, reference(&wells[0]));

    for k in 0..breaks.len() - 1 {
        let well = &wells[k];
        let (a, b) = (breaks[k], breaks[k + 1]);
        let steps = ((b - a) / dt_int * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let h = (b - a) / steps as f64;
        let mut acc = -qm * well.potential.gradient(z);
        for j in 0..steps {
            let t1 = if j + 1 == steps { b } else { a + (j + 1) as f64 * h };
            for w in YOSHIDA {
                let vh = v + 0.5 * w * h * acc;
                z += w * h * vh;
                if !basis.contains(z) || z < well.left || z > well.right {
                    traj.lost = true;
                    traj.loss_time = Some(t1);
                    let (ke, _) = energy(well, z.clamp(well.left, well.right), vh);
                    let pe = charge * (well.potential.value(z.clamp(well.left, well.right)) - well.floor);
                    traj.push(IonState { z, v: vh, t: t1 }, ke, pe, reference(well));
                    return Ok(traj);
                }
                acc = -qm * well.potential.gradient(z);
                v = vh + 0.5 * w * h * acc;
            }
            let next = if j + 1 == steps { (k + 1).min(wells.len() - 1) } else { k };
            let (ke, pe) = energy(&wells[next], z, v);
            traj.push(IonState { z, v, t: t1 }, ke, pe.max(0.0), reference(&wells[next]));
        }
    }
    Ok(traj)
}
