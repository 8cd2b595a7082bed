use rayon::prelude::*;

use super::{estimate_success, PreparedSequence, SequenceOutcome, SequenceSpec, SuccessRecord};
use crate::trap_model::AxialBasis;
use crate::waveform::RampSpec;
use crate::{Error, Result};

/// One row of a transport-time sweep. Energies are means in meV; the final
/// energy averages the surviving trials only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauRow {
    pub tau: f64,
    pub p_net: f64,
    pub p_lo: f64,
    pub p_hi: f64,
    pub e_final_mev: f64,
    pub e_max_mev: f64,
    pub excursion_um: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaRow {
    pub sigma: f64,
    pub e_final_mev: f64,
    pub e_max_mev: f64,
}

fn run_trials(basis: &AxialBasis, spec: &SequenceSpec, trials: usize) -> Result<Vec<SequenceOutcome>> {
    if trials == 0 {
        return Err(Error::invalid("a sweep needs at least one trial per point"));
    }
    let prepared = PreparedSequence::new(basis, spec)?;
    (0..trials as u64)
        .into_par_iter()
        .map(|k| prepared.trial(basis, k, false))
        .collect()
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

fn check_positive(values: &[f64], what: &str) -> Result<()> {
    if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::invalid(format!("{what} values must be positive")));
    }
    Ok(())
}

/// Repeats the sequence `trials` times per transport time. Trials of one
/// point form a single attempt stream for the success estimate.
pub fn sweep_tau(basis: &AxialBasis, template: &SequenceSpec, taus: &[f64], trials: usize) -> Result<Vec<TauRow>> {
    check_positive(taus, "tau")?;
    taus.par_iter()
        .map(|&tau| {
            let spec = SequenceSpec {
                ramp: template.ramp.with_tau(tau)?,
                ..template.clone()
            };
            let out = run_trials(basis, &spec, trials)?;
            let kept: Vec<bool> = out.iter().map(|o| o.survived).collect();
            let est = estimate_success(&SuccessRecord::from_attempts(&kept, tau, spec.background_loss)?)?;
            Ok(TauRow {
                tau,
                p_net: est.p_net,
                p_lo: est.ci68.0,
                p_hi: est.ci68.1,
                e_final_mev: 1e3 * mean(out.iter().filter(|o| o.survived).map(|o| o.e_final)),
                e_max_mev: 1e3 * mean(out.iter().map(|o| o.e_max)),
                excursion_um: 1e6 * mean(out.iter().map(|o| o.max_excursion)),
            })
        })
        .collect()
}

/// Mean excitation against the ramp slope parameter at the template's
/// transport time.
pub fn sweep_sigma(basis: &AxialBasis, template: &SequenceSpec, sigmas: &[f64], trials: usize) -> Result<Vec<SigmaRow>> {
    check_positive(sigmas, "sigma")?;
    sigmas
        .par_iter()
        .map(|&sigma| {
            let spec = SequenceSpec {
                ramp: RampSpec { sigma, ..template.ramp },
                ..template.clone()
            };
            let out = run_trials(basis, &spec, trials)?;
            Ok(SigmaRow {
                sigma,
                e_final_mev: 1e3 * mean(out.iter().filter(|o| !o.escaped).map(|o| o.e_final)),
                e_max_mev: 1e3 * mean(out.iter().map(|o| o.e_max)),
            })
        })
        .collect()
}

/// Slope parameter with the lowest mean final energy.
pub fn argmin_sigma(rows: &[SigmaRow]) -> Option<f64> {
    rows.iter()
        .filter(|r| r.e_final_mev.is_finite())
        .min_by(|a, b| a.e_final_mev.total_cmp(&b.e_final_mev))
        .map(|r| r.sigma)
}
