use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::PhaseHistogram;
use crate::{Error, Result};

/// `offset + A sin(h theta + phase)` fitted to a histogram.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SineFit {
    /// Projection of the fitted sinusoid on the reference phase, in counts
    /// per bin. Negative when the modulation is in antiphase.
    pub amplitude: f64,
    /// Phase of the fitted sinusoid in rad, taken with the sign of
    /// `amplitude`, so it lies within a quarter turn of the reference.
    pub phase: f64,
    /// Counts per bin.
    pub offset: f64,
    pub amplitude_sigma: f64,
}

impl SineFit {
    /// Unsigned modulation amplitude.
    pub fn magnitude(&self, reference_phase: f64) -> f64 {
        (self.amplitude / (self.phase - reference_phase).cos()).abs()
    }
}

const MAX_ITERATIONS: usize = 50;

/// Poisson-weighted least-squares sine fit.
///
/// The model is linear in `(offset, a_s, a_c)` with bin-averaged basis
/// functions, and iterating the weights `1 / mu` converges to the Poisson
/// maximum-likelihood estimate. The signed amplitude is the projection
/// `a_s cos(ref) + a_c sin(ref)`.
pub fn fit_sine(histogram: &PhaseHistogram, reference_phase: f64) -> Result<SineFit> {
    let total = histogram.total();
    if total == 0 {
        return Err(Error::Estimation("histogram is empty".into()));
    }
    if histogram.counts().iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::Estimation("all counts fall into one bin".into()));
    }
    let n = histogram.bins();
    let g = histogram.bin_average_factor();
    let rows: Vec<Vector3<f64>> = (0..n)
        .map(|j| {
            let (s, c) = histogram.bin_phase(j).sin_cos();
            Vector3::new(1.0, g * s, g * c)
        })
        .collect();
    let y: Vec<f64> = histogram.counts().iter().map(|&c| c as f64).collect();
    let mean = total as f64 / n as f64;
    // keeps near-empty bins from taking unbounded weight
    let floor = 0.5f64.min(mean);

    let mut mu = vec![mean; n];
    let mut beta = Vector3::zeros();
    let mut cov = Matrix3::zeros();
    for _ in 0..MAX_ITERATIONS {
        let mut info = Matrix3::zeros();
        let mut rhs = Vector3::zeros();
        for ((x, &yj), &m) in rows.iter().zip(&y).zip(&mu) {
            let w = 1.0 / m.max(floor);
            info += w * x * x.transpose();
            rhs += w * yj * x;
        }
        cov = info
            .try_inverse()
            .ok_or_else(|| Error::Estimation("singular sine-fit normal matrix".into()))?;
        let next = cov * rhs;
        let change = (next - beta).norm();
        beta = next;
        for (m, x) in mu.iter_mut().zip(&rows) {
            *m = x.dot(&beta);
        }
        if change <= 1e-12 * (1.0 + beta.norm()) {
            break;
        }
    }

    let u = Vector3::new(0.0, reference_phase.cos(), reference_phase.sin());
    let amplitude = u.dot(&beta);
    // the phase flips by pi together with the sign of the amplitude
    let mut phase = beta[2].atan2(beta[1]);
    if amplitude < 0.0 {
        phase -= PI;
    }
    Ok(SineFit {
        amplitude,
        phase: (phase + PI).rem_euclid(2.0 * PI) - PI,
        offset: beta[0],
        amplitude_sigma: (u.transpose() * cov * u)[0].max(0.0).sqrt(),
    })
}

/// Pearson chi-squared test of a histogram against a flat distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatnessTest {
    pub chi2: f64,
    pub dof: usize,
    pub p_value: f64,
}

impl FlatnessTest {
    /// True when flatness is not rejected at `confidence` (e.g. 0.95).
    pub fn is_flat(&self, confidence: f64) -> bool {
        self.p_value > 1.0 - confidence
    }
}

pub fn flatness_test(histogram: &PhaseHistogram) -> Result<FlatnessTest> {
    let total = histogram.total();
    if total == 0 {
        return Err(Error::Estimation("histogram is empty".into()));
    }
    let n = histogram.bins();
    let expected = total as f64 / n as f64;
    let chi2 = histogram
        .counts()
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum::<f64>();
    let dof = n - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::Estimation(e.to_string()))?;
    Ok(FlatnessTest {
        chi2,
        dof,
        p_value: dist.sf(chi2),
    })
}
