//! Photon-arrival versus RF-phase correlation analysis.
//!
//! A driven micromotion modulates the Doppler-shifted scattering rate at
//! the drive frequency. Folding photon arrival times onto the RF phase
//! gives a histogram whose sinusoidal modulation is proportional to the
//! residual stray field, so a linear fit of the signed amplitude against a
//! compensation voltage locates the RF null.

mod fit;
mod scan;

pub use fit::{fit_sine, flatness_test, FlatnessTest, SineFit};
pub use scan::{find_optimum, simulate_scan, CompensationScan, OptimumEstimate, ScanDesign, ScanPoint};

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::table;
use crate::{Error, Result};

/// Span of the counter window in RF periods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fold {
    /// One drive period across the histogram.
    #[default]
    OnePeriod,
    /// Two drive periods, as with a stop signal locked to half the drive.
    TwoPeriods,
}

impl Fold {
    /// Number of modulation cycles across the histogram.
    pub fn harmonic(self) -> f64 {
        match self {
            Fold::OnePeriod => 1.0,
            Fold::TwoPeriods => 2.0,
        }
    }

    fn label(self) -> &'static str {
        match self {
            Fold::OnePeriod => "one-period",
            Fold::TwoPeriods => "two-periods",
        }
    }

    fn from_label(s: &str) -> Option<Self> {
        match s {
            "one-period" => Some(Fold::OnePeriod),
            "two-periods" => Some(Fold::TwoPeriods),
            _ => None,
        }
    }
}

pub const DEFAULT_BINS: usize = 32;
pub const MIN_BINS: usize = 8;

/// Photon counts per RF-phase bin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhaseHistogram {
    counts: Vec<u64>,
    fold: Fold,
}

impl PhaseHistogram {
    pub fn new(counts: Vec<u64>, fold: Fold) -> Result<Self> {
        if counts.len() < MIN_BINS {
            return Err(Error::invalid(format!(
                "histogram needs at least {MIN_BINS} bins, got {}",
                counts.len()
            )));
        }
        Ok(Self { counts, fold })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn fold(&self) -> Fold {
        self.fold
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Modulation phase `h * theta` at the centre of bin `j`.
    pub fn bin_phase(&self, j: usize) -> f64 {
        self.fold.harmonic() * 2.0 * PI * (j as f64 + 0.5) / self.bins() as f64
    }

    /// Ratio of the bin-averaged to the bin-centre value of a sinusoid.
    pub fn bin_average_factor(&self) -> f64 {
        let half = self.fold.harmonic() * PI / self.bins() as f64;
        half.sin() / half
    }

    /// Rows `phase_bin_index, counts` below a format header.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "# phase-histogram v1 bins={} fold={}\n# columns: phase_bin_index, counts\n",
            self.bins(),
            self.fold.label()
        );
        for (j, c) in self.counts.iter().enumerate() {
            out.push_str(&format!("{j}, {c}\n"));
        }
        out
    }

    /// Parses the histogram format. The header is optional for external
    /// data, which then defaults to one period.
    pub fn from_table(text: &str) -> Result<Self> {
        let parsed = table::parse(text)?;
        let mut fold = Fold::default();
        for (line, h) in &parsed.header {
            if let Some(label) = table::header_value(h, "fold") {
                fold = Fold::from_label(label)
                    .ok_or_else(|| Error::parse(*line, format!("unknown fold `{label}`")))?;
            }
        }
        let mut counts = Vec::with_capacity(parsed.rows.len());
        for row in &parsed.rows {
            let [index, count] = row.values[..] else {
                return Err(Error::parse(row.line, "expected `phase_bin_index, counts`"));
            };
            if index != counts.len() as f64 {
                return Err(Error::parse(row.line, format!("expected bin index {}", counts.len())));
            }
            if !(count >= 0.0 && count.fract() == 0.0) {
                return Err(Error::parse(row.line, "counts must be non-negative integers"));
            }
            counts.push(count as u64);
        }
        let last = parsed.rows.last().map_or(1, |r| r.line);
        Self::new(counts, fold).map_err(|e| Error::parse(last, e.to_string()))
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_table(&std::fs::read_to_string(path)?)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_table())?;
        Ok(())
    }
}

/// Poisson histogram of photons detected at `mean_rate` for `duration`
/// seconds, with the rate modulated as `1 + depth sin(h theta + phase)`.
/// Bin means are exact averages of the modulated rate over each bin.
pub fn simulate_histogram<R: Rng + ?Sized>(
    depth: f64,
    phase: f64,
    mean_rate: f64,
    duration: f64,
    bins: usize,
    fold: Fold,
    rng: &mut R,
) -> Result<PhaseHistogram> {
    if !(depth.abs() <= 1.0) {
        return Err(Error::invalid(format!("modulation depth must satisfy |d| <= 1, got {depth}")));
    }
    if !(duration > 0.0 && mean_rate >= 0.0 && mean_rate.is_finite()) {
        return Err(Error::invalid("duration must be > 0 and mean rate >= 0"));
    }
    let mut hist = PhaseHistogram::new(vec![0; bins], fold)?;
    let per_bin = mean_rate * duration / bins as f64;
    let g = hist.bin_average_factor();
    for j in 0..bins {
        let mean = per_bin * (1.0 + depth * g * (hist.bin_phase(j) + phase).sin());
        if mean > 0.0 {
            let draw = Poisson::new(mean).map_err(|e| Error::invalid(format!("bin mean: {e}")))?;
            hist.counts[j] = draw.sample(rng) as u64;
        }
    }
    Ok(hist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bin_average_factor_matches_quadrature() {
        let h = PhaseHistogram::new(vec![0; 16], Fold::TwoPeriods).unwrap();
        let (a, b) = (h.bin_phase(3) - 2.0 * PI / 16.0, h.bin_phase(3) + 2.0 * PI / 16.0);
        let n = 100_000;
        let avg: f64 = (0..n)
            .map(|k| (a + (b - a) * (k as f64 + 0.5) / n as f64).sin())
            .sum::<f64>()
            / n as f64;
        assert!((avg / h.bin_phase(3).sin() - h.bin_average_factor()).abs() < 1e-9);
    }

    #[test]
    fn table_round_trip() {
        let h = PhaseHistogram::new((0..32).map(|j| 100 + j * 3).collect(), Fold::TwoPeriods).unwrap();
        assert_eq!(PhaseHistogram::from_table(&h.to_table()).unwrap(), h);
        let bare = "0, 5\n1, 6\n2, 7\n3, 8\n4, 9\n5, 1\n6, 2\n7, 3\n";
        let ext = PhaseHistogram::from_table(bare).unwrap();
        assert_eq!(ext.fold(), Fold::OnePeriod);
        assert_eq!(ext.total(), 41);
    }

    #[test]
    fn table_errors() {
        match PhaseHistogram::from_table("0, 5\n2, 6\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        match PhaseHistogram::from_table("0, 5\n1, -6\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(PhaseHistogram::from_table("0, 1\n1, 2\n").is_err());
    }

    #[test]
    fn simulation_validates_and_conserves_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(simulate_histogram(1.5, 0.0, 1e3, 1.0, 32, Fold::OnePeriod, &mut rng).is_err());
        assert!(simulate_histogram(0.1, 0.0, 1e3, 1.0, 4, Fold::OnePeriod, &mut rng).is_err());
        let h = simulate_histogram(0.8, 0.3, 2e4, 30.0, 32, Fold::OnePeriod, &mut rng).unwrap();
        let expected = 6e5;
        assert!((h.total() as f64 - expected).abs() < 5.0 * expected.sqrt());
    }
}
