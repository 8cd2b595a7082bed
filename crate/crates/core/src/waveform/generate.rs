use rayon::prelude::*;

use super::ramp::RampSpec;
use super::signal::{quantize, DacSpec, VoltageWaveform};
use super::solver::{solve_voltages, SolveTarget, SolverConfig};
use crate::trap_model::{AxialBasis, IonSpecies};
use crate::Result;

/// Voltage rows for the round-trip ramp, one solve per DAC update.
///
/// Row `k` realises a well of frequency `spec.omega_target` at
/// `origin + z0(t_k)`. When the duration is a whole number of updates the
/// return half copies the outbound rows, so row `k` equals row `n - k`
/// bit for bit, also after quantization.
pub fn generate_waveform(
    basis: &AxialBasis,
    spec: &RampSpec,
    config: &SolverConfig,
    species: &IonSpecies,
    dac: Option<&DacSpec>,
    origin: f64,
) -> Result<VoltageWaveform> {
    spec.validate()?;
    config.validate()?;
    if let Some(d) = dac {
        d.validate()?;
    }
    let n = spec.update_count();
    let unique = if spec.is_commensurate() { n / 2 } else { n };
    let solved: Vec<Vec<f64>> = (0..=unique)
        .into_par_iter()
        .map(|k| {
            let target = SolveTarget {
                z0: origin + spec.held_position(k),
                omega: spec.omega_target,
            };
            solve_voltages(basis, target, config, species)
                .map(|s| s.voltages)
                .map_err(|e| e.at_step(k))
        })
        .collect::<Result<_>>()?;
    let rows: Vec<Vec<f64>> = (0..=n)
        .map(|k| {
            if k <= unique {
                solved[k].clone()
            } else {
                solved[n - k].clone()
            }
        })
        .collect();
    let times = (0..=n).map(|k| spec.update_time(k)).collect();
    let waveform = VoltageWaveform::new(times, rows, spec.dt_update)?;
    match dac {
        Some(d) => quantize(&waveform, d),
        None => Ok(waveform),
    }
}
