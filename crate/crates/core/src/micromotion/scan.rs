use std::path::Path;

use rand::Rng;

use super::{fit_sine, simulate_histogram, Fold, PhaseHistogram, SineFit, DEFAULT_BINS};
use crate::table::{self, TableWriter};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanPoint {
    /// Compensation voltage in V.
    pub voltage: f64,
    /// Signed sine amplitude in counts per bin.
    pub amplitude: f64,
    pub amplitude_sigma: f64,
}

/// Signed micromotion amplitudes against a compensation voltage.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CompensationScan {
    pub points: Vec<ScanPoint>,
}

impl CompensationScan {
    pub fn push_fit(&mut self, voltage: f64, fit: &SineFit) {
        self.points.push(ScanPoint {
            voltage,
            amplitude: fit.amplitude,
            amplitude_sigma: fit.amplitude_sigma,
        });
    }

    pub fn to_table(&self) -> String {
        let mut w = TableWriter::new();
        w.comment("compensation-scan v1");
        w.columns(&["voltage_V", "amplitude", "amplitude_sigma"]);
        for p in &self.points {
            w.row_exact(&[p.voltage, p.amplitude, p.amplitude_sigma]);
        }
        w.finish()
    }

    pub fn from_table(text: &str) -> Result<Self> {
        let parsed = table::parse(text)?;
        let mut points = Vec::with_capacity(parsed.rows.len());
        for row in &parsed.rows {
            let [voltage, amplitude, amplitude_sigma] = row.values[..] else {
                return Err(Error::parse(row.line, "expected `voltage_V, amplitude, amplitude_sigma`"));
            };
            if amplitude_sigma < 0.0 {
                return Err(Error::parse(row.line, "amplitude_sigma must be >= 0"));
            }
            points.push(ScanPoint {
                voltage,
                amplitude,
                amplitude_sigma,
            });
        }
        Ok(Self { points })
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_table(&std::fs::read_to_string(path)?)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_table())?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimumEstimate {
    /// Voltage where the fitted amplitude vanishes.
    pub v_opt: f64,
    pub v_sigma: f64,
    /// Amplitude per volt.
    pub slope: f64,
    /// Reduced chi-squared of the line fit; NaN without degrees of freedom.
    pub chi2_reduced: f64,
    /// The amplitudes do not change sign, so the root is extrapolated.
    pub extrapolated: bool,
}

/// Weighted straight-line fit of amplitude against voltage and its root.
///
/// Weights are `1 / sigma^2`; a scan whose sigmas are all zero is fitted
/// unweighted. The root uncertainty propagates the line covariance, scaled
/// by the reduced chi-squared when that exceeds one.
pub fn find_optimum(scan: &CompensationScan) -> Result<OptimumEstimate> {
    let pts = &scan.points;
    let first = pts
        .first()
        .ok_or_else(|| Error::invalid("compensation scan is empty"))?;
    if pts.iter().all(|p| p.voltage == first.voltage) {
        return Err(Error::invalid("scan needs at least 2 distinct voltages"));
    }
    if pts.iter().any(|p| !(p.voltage.is_finite() && p.amplitude.is_finite())) {
        return Err(Error::invalid("scan values must be finite"));
    }
    let zero = pts.iter().filter(|p| p.amplitude_sigma == 0.0).count();
    let weights: Vec<f64> = if zero == pts.len() {
        vec![1.0; pts.len()]
    } else if zero == 0 {
        pts.iter().map(|p| 1.0 / (p.amplitude_sigma * p.amplitude_sigma)).collect()
    } else {
        return Err(Error::invalid("either all or no scan points may have zero sigma"));
    };

    let sw: f64 = weights.iter().sum();
    let vbar = pts.iter().zip(&weights).map(|(p, w)| w * p.voltage).sum::<f64>() / sw;
    let abar = pts.iter().zip(&weights).map(|(p, w)| w * p.amplitude).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().zip(&weights).map(|(p, w)| w * (p.voltage - vbar).powi(2)).sum();
    let sxy: f64 = pts
        .iter()
        .zip(&weights)
        .map(|(p, w)| w * (p.voltage - vbar) * (p.amplitude - abar))
        .sum();
    let slope = sxy / sxx;
    if !(slope != 0.0 && slope.is_finite()) {
        return Err(Error::Estimation("amplitude does not depend on the voltage".into()));
    }
    let v_opt = vbar - abar / slope;

    let dof = pts.len() as f64 - 2.0;
    let chi2: f64 = pts
        .iter()
        .zip(&weights)
        .map(|(p, w)| w * (p.amplitude - abar - slope * (p.voltage - vbar)).powi(2))
        .sum();
    let chi2_reduced = if dof > 0.0 { chi2 / dof } else { f64::NAN };
    let mut scale = if chi2_reduced > 1.0 { chi2_reduced } else { 1.0 };
    if zero == pts.len() {
        // unit weights carry no absolute scale
        scale = if dof > 0.0 { chi2_reduced } else { 0.0 };
    }
    // centred parametrisation: intercept and slope are uncorrelated
    let var_a = scale / sw;
    let var_b = scale / sxx;
    let v_sigma = ((var_a + (abar / slope).powi(2) * var_b) / (slope * slope)).sqrt();

    let positive = pts.iter().any(|p| p.amplitude > 0.0);
    let negative = pts.iter().any(|p| p.amplitude < 0.0);
    Ok(OptimumEstimate {
        v_opt,
        v_sigma,
        slope,
        chi2_reduced,
        extrapolated: !(positive && negative),
    })
}

/// Synthetic compensation scan: the modulation depth grows linearly with
/// the distance of the voltage from the RF null.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanDesign {
    pub voltages: Vec<f64>,
    pub v_opt: f64,
    /// Modulation depth per volt of detuning from `v_opt`.
    pub depth_per_volt: f64,
    pub phase: f64,
    /// Detected photon rate in counts/s.
    pub mean_rate: f64,
    /// Collection time per histogram in s.
    pub duration: f64,
    pub bins: usize,
    pub fold: Fold,
}

impl ScanDesign {
    /// Ten histograms from 97 V to 106 V at 20 kHz, 30 s each (five
    /// minutes in total), with the null at 101.6 V.
    pub fn reference_scan() -> Self {
        Self {
            voltages: (0..10).map(|k| 97.0 + k as f64).collect(),
            v_opt: 101.6,
            depth_per_volt: 0.07,
            phase: 0.0,
            mean_rate: 20e3,
            duration: 30.0,
            bins: DEFAULT_BINS,
            fold: Fold::OnePeriod,
        }
    }
}

/// Simulates every histogram of a design and fits it against the design
/// phase as reference.
pub fn simulate_scan<R: Rng + ?Sized>(
    design: &ScanDesign,
    rng: &mut R,
) -> Result<(Vec<PhaseHistogram>, CompensationScan)> {
    let mut hists = Vec::with_capacity(design.voltages.len());
    let mut scan = CompensationScan::default();
    for &v in &design.voltages {
        let depth = design.depth_per_volt * (v - design.v_opt);
        let h = simulate_histogram(
            depth,
            design.phase,
            design.mean_rate,
            design.duration,
            design.bins,
            design.fold,
            rng,
        )?;
        scan.push_fit(v, &fit_sine(&h, design.phase)?);
        hists.push(h);
    }
    Ok((hists, scan))
}
