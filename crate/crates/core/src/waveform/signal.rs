use std::path::Path;

use crate::table::{self, fmt_exact};
use crate::{Error, Result};

/// Time-sampled electrode voltages. Row `k` is applied from `times[k]`
/// until the next row (zero-order hold); the last row is held thereafter.
#[derive(Debug, Clone, PartialEq)]
pub struct VoltageWaveform {
    times: Vec<f64>,
    steps: Vec<Vec<f64>>,
    dt_update: f64,
    /// DAC rounding was applied to the commanded voltages.
    pub quantized: bool,
    pub dac_bits: Option<u32>,
    /// Rows are the RC-filtered response on a fine time grid.
    pub filtered: bool,
    /// At least one entry was clamped to the DAC full scale.
    pub saturated: bool,
}

impl VoltageWaveform {
    pub fn new(times: Vec<f64>, steps: Vec<Vec<f64>>, dt_update: f64) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::invalid("waveform needs at least one row"));
        }
        if times.len() != steps.len() {
            return Err(Error::invalid(format!(
                "{} time stamps for {} waveform rows",
                times.len(),
                steps.len()
            )));
        }
        if !(dt_update > 0.0 && dt_update.is_finite()) {
            return Err(Error::invalid(format!("dt_update must be > 0, got {dt_update}")));
        }
        let n = steps[0].len();
        if n == 0 {
            return Err(Error::invalid("waveform rows must not be empty"));
        }
        for (k, row) in steps.iter().enumerate() {
            if row.len() != n {
                return Err(Error::invalid(format!("row {k} has {} entries, expected {n}", row.len())));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("row {k} contains non-finite voltages")));
            }
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("waveform times must be finite and strictly increasing"));
        }
        Ok(Self {
            times,
            steps,
            dt_update,
            quantized: false,
            dac_bits: None,
            filtered: false,
            saturated: false,
        })
    }

    /// Rows at `t_k = k dt_update`.
    pub fn uniform(steps: Vec<Vec<f64>>, dt_update: f64) -> Result<Self> {
        let times = (0..steps.len()).map(|k| k as f64 * dt_update).collect();
        Self::new(times, steps, dt_update)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn steps(&self) -> &[Vec<f64>] {
        &self.steps
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.steps[k]
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn electrode_count(&self) -> usize {
        self.steps[0].len()
    }

    pub fn dt_update(&self) -> f64 {
        self.dt_update
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// Index of the row in force at time `t`.
    pub fn row_index_at(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s <= t).saturating_sub(1)
    }

    /// True when every entry lies in `[lo, hi]`.
    pub fn within(&self, lo: f64, hi: f64) -> bool {
        self.steps.iter().flatten().all(|v| (lo..=hi).contains(v))
    }

    /// Shifts all time stamps by `dt`.
    pub fn shifted(mut self, dt: f64) -> Self {
        for t in &mut self.times {
            *t += dt;
        }
        self
    }

    pub fn to_table(&self) -> String {
        let mut out = format!(
            "# waveform v1 electrodes={} dt_us={} quantized={}",
            self.electrode_count(),
            fmt_exact(self.dt_update * 1e6),
            self.quantized
        );
        if let Some(b) = self.dac_bits {
            out.push_str(&format!(" dac_bits={b}"));
        }
        if self.filtered {
            out.push_str(" filtered=true");
        }
        out.push('\n');
        for (t, row) in self.times.iter().zip(&self.steps) {
            out.push_str(&fmt_exact(t * 1e6));
            for v in row {
                out.push_str(", ");
                out.push_str(&fmt_exact(*v));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_table(text: &str) -> Result<Self> {
        let parsed = table::parse(text)?;
        let (hline, header) = parsed
            .header
            .first()
            .ok_or_else(|| Error::parse(1, "missing `# waveform v1` header"))?;
        if !header.starts_with("waveform v1") {
            return Err(Error::parse(*hline, "expected `waveform v1` header"));
        }
        let field = |key: &str| table::header_value(header, key);
        let n: usize = field("electrodes")
            .and_then(|v| v.parse().ok())
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::parse(*hline, "header lacks a valid electrodes=<N> field"))?;
        let dt_us: f64 = field("dt_us")
            .and_then(|v| v.parse().ok())
            .filter(|v: &f64| *v > 0.0)
            .ok_or_else(|| Error::parse(*hline, "header lacks a valid dt_us=<x> field"))?;
        let flag = |key: &str| -> Result<bool> {
            match field(key) {
                None | Some("false") => Ok(false),
                Some("true") => Ok(true),
                Some(other) => Err(Error::parse(*hline, format!("{key} must be true or false, got `{other}`"))),
            }
        };
        let quantized = flag("quantized")?;
        let filtered = flag("filtered")?;
        let dac_bits = match field("dac_bits") {
            None => None,
            Some(v) => Some(
                v.parse::<u32>()
                    .map_err(|_| Error::parse(*hline, format!("bad dac_bits `{v}`")))?,
            ),
        };

        let mut times = Vec::with_capacity(parsed.rows.len());
        let mut steps = Vec::with_capacity(parsed.rows.len());
        for row in &parsed.rows {
            if row.values.len() != n + 1 {
                return Err(Error::parse(
                    row.line,
                    format!("expected {} columns (t_us and {n} voltages), found {}", n + 1, row.values.len()),
                ));
            }
            let t = row.values[0] * 1e-6;
            if times.last().is_some_and(|&p| t <= p) {
                return Err(Error::parse(row.line, "time column is not strictly increasing"));
            }
            times.push(t);
            steps.push(row.values[1..].to_vec());
        }
        if steps.is_empty() {
            return Err(Error::parse(*hline, "waveform has no rows"));
        }
        let mut w = Self::new(times, steps, dt_us * 1e-6)?;
        w.quantized = quantized;
        w.filtered = filtered;
        w.dac_bits = dac_bits;
        Ok(w)
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_table(&std::fs::read_to_string(path)?)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_table())?;
        Ok(())
    }
}

/// DAC model: `bits` of resolution over `[-full_scale, full_scale]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DacSpec {
    pub bits: u32,
    pub full_scale: f64,
    pub update_rate: f64,
}

impl Default for DacSpec {
    fn default() -> Self {
        Self {
            bits: 16,
            full_scale: 10.0,
            update_rate: 1e6,
        }
    }
}

impl DacSpec {
    pub fn validate(&self) -> Result<()> {
        if !(8..=32).contains(&self.bits) {
            return Err(Error::invalid(format!("DAC bits must be in 8..=32, got {}", self.bits)));
        }
        if !(self.full_scale > 0.0 && self.update_rate > 0.0) {
            return Err(Error::invalid("DAC full scale and update rate must be > 0"));
        }
        Ok(())
    }

    /// Voltage step of one code, `2 full_scale / 2^bits`.
    pub fn lsb(&self) -> f64 {
        2.0 * self.full_scale / 2f64.powi(self.bits as i32)
    }

    /// Nearest DAC level, clamped to full scale. Returns the level and
    /// whether clamping occurred.
    pub fn level(&self, v: f64) -> (f64, bool) {
        let lsb = self.lsb();
        let clamped = v.clamp(-self.full_scale, self.full_scale);
        ((clamped / lsb).round() * lsb, clamped != v)
    }
}

/// Rounds every entry to the nearest DAC level. Idempotent.
pub fn quantize(waveform: &VoltageWaveform, dac: &DacSpec) -> Result<VoltageWaveform> {
    dac.validate()?;
    let mut out = waveform.clone();
    let mut saturated = false;
    for row in &mut out.steps {
        for v in row.iter_mut() {
            let (q, clipped) = dac.level(*v);
            saturated |= clipped;
            *v = q;
        }
    }
    out.quantized = true;
    out.dac_bits = Some(dac.bits);
    out.saturated |= saturated;
    Ok(out)
}

/// Linear interpolation from `u_from` to `u_to` in `steps` updates of `dt`,
/// endpoints included (`steps + 1` rows, the last equal to `u_to`).
pub fn morph(u_from: &[f64], u_to: &[f64], steps: usize, dt: f64) -> Result<VoltageWaveform> {
    if u_from.len() != u_to.len() {
        return Err(Error::invalid(format!(
            "morph endpoints have {} and {} entries",
            u_from.len(),
            u_to.len()
        )));
    }
    if steps == 0 {
        return Err(Error::invalid("morph needs at least one step"));
    }
    let rows = (0..=steps)
        .map(|k| {
            if k == steps {
                return u_to.to_vec();
            }
            let s = k as f64 / steps as f64;
            u_from.iter().zip(u_to).map(|(a, b)| a + (b - a) * s).collect()
        })
        .collect();
    VoltageWaveform::uniform(rows, dt)
}

/// First-order RC response (corner `corner_hz`) to the zero-order-hold
/// input, starting from steady state at the first row.
///
/// Every hold interval is split into `oversample` sub-steps. Each output row
/// is the exact mean of the filter output over its sub-step, so replaying the
/// result as a zero-order hold reproduces the filtered voltage to first order
/// and an infinite corner returns the input unchanged.
pub fn lowpass(waveform: &VoltageWaveform, corner_hz: f64, oversample: usize) -> Result<VoltageWaveform> {
    if !(corner_hz > 0.0) {
        return Err(Error::invalid(format!("corner frequency must be > 0, got {corner_hz}")));
    }
    if oversample == 0 {
        return Err(Error::invalid("oversample must be >= 1"));
    }
    let rc = 1.0 / (2.0 * std::f64::consts::PI * corner_hz);
    let n = waveform.len();
    let mut y = waveform.steps[0].clone();
    let mut times = Vec::with_capacity((n - 1) * oversample + 1);
    let mut rows = Vec::with_capacity(times.capacity());

    let mut emit = |t: f64, h: f64, y: &mut Vec<f64>, u: &[f64]| {
        let decay = (-h / rc).exp();
        let mean_gain = if h / rc < 1e-8 { 1.0 - 0.5 * h / rc } else { rc / h * (1.0 - decay) };
        let row: Vec<f64> = y.iter().zip(u).map(|(yi, ui)| ui + (yi - ui) * mean_gain).collect();
        for (yi, ui) in y.iter_mut().zip(u) {
            *yi = ui + (*yi - ui) * decay;
        }
        times.push(t);
        rows.push(row);
    };

    for k in 0..n - 1 {
        let (t0, t1) = (waveform.times[k], waveform.times[k + 1]);
        let h = (t1 - t0) / oversample as f64;
        for j in 0..oversample {
            emit(t0 + j as f64 * h, h, &mut y, &waveform.steps[k]);
        }
    }
    let h_last = waveform.dt_update / oversample as f64;
    emit(waveform.end(), h_last, &mut y, &waveform.steps[n - 1]);

    let mut out = VoltageWaveform::new(times, rows, waveform.dt_update)?;
    out.quantized = waveform.quantized;
    out.dac_bits = waveform.dac_bits;
    out.saturated = waveform.saturated;
    out.filtered = true;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Transport vector at the start of the round trip in the reference
    /// experiment.
    const U_TRANS_0: [f64; 15] = [
        -8.77, 9.34, -2.89, 2.30, 8.33, 1.95, 1.49, 0.03, -0.48, -0.70, -0.36, 0.47, 1.32, 5.68, 0.63,
    ];

    #[test]
    fn reference_row_is_valid() {
        let w = VoltageWaveform::uniform(vec![U_TRANS_0.to_vec()], 1e-6).unwrap();
        assert!(w.within(-10.0, 10.0));
        let back = VoltageWaveform::from_table(&w.to_table()).unwrap();
        assert_eq!(back.row(0), &U_TRANS_0);
    }

    #[test]
    fn table_round_trip() {
        let rows: Vec<Vec<f64>> = (0..7).map(|k| vec![k as f64 * 0.1, -1.0 / (k as f64 + 3.0)]).collect();
        let mut w = VoltageWaveform::uniform(rows, 1e-6).unwrap();
        w = quantize(&w, &DacSpec::default()).unwrap();
        let back = VoltageWaveform::from_table(&w.to_table()).unwrap();
        assert_eq!(back.steps(), w.steps());
        assert!(back.quantized);
        assert_eq!(back.dac_bits, Some(16));
        for (a, b) in back.times().iter().zip(w.times()) {
            assert!((a - b).abs() < 1e-20);
        }
    }

    #[test]
    fn table_errors() {
        let bad = "# waveform v1 electrodes=2 dt_us=1 quantized=false\n0, 1, 2\n1, 1\n";
        assert!(matches!(VoltageWaveform::from_table(bad), Err(Error::Parse { line: 3, .. })));
        let order = "# waveform v1 electrodes=1 dt_us=1 quantized=false\n0, 1\n0, 1\n";
        assert!(matches!(VoltageWaveform::from_table(order), Err(Error::Parse { line: 3, .. })));
        let flag = "# waveform v1 electrodes=1 dt_us=1 quantized=yes\n0, 1\n";
        assert!(VoltageWaveform::from_table(flag).is_err());
    }

    #[test]
    fn quantize_basics() {
        let dac = DacSpec::default();
        assert!((dac.lsb() - 20.0 / 65536.0).abs() < 1e-18);
        let w = VoltageWaveform::uniform(vec![vec![0.0001, 3.3, -10.5]], 1e-6).unwrap();
        let q = quantize(&w, &dac).unwrap();
        assert_eq!(q.row(0)[0], 0.0);
        assert_eq!(q.row(0)[2], -10.0);
        assert!(q.saturated && q.quantized);
        assert_eq!(quantize(&q, &dac).unwrap().steps(), q.steps());
        for v in q.row(0) {
            assert_eq!((v / dac.lsb()).fract(), 0.0);
        }
    }

    #[test]
    fn morph_endpoints() {
        let a = [1.0, -2.0, 0.3];
        let b = [0.7, 4.0, 0.1];
        let one = morph(&a, &b, 1, 1e-6).unwrap();
        assert_eq!(one.steps(), &[a.to_vec(), b.to_vec()]);
        let ten = morph(&a, &b, 10, 1e-6).unwrap();
        assert_eq!(ten.len(), 11);
        assert!((ten.end() - 10e-6).abs() < 1e-18);
        assert!((ten.row(5)[1] - 1.0).abs() < 1e-15);
        let same = morph(&a, &a, 4, 1e-6).unwrap();
        assert!(same.steps().iter().all(|r| r == &a.to_vec()));
        assert!(morph(&a, &b[..2], 3, 1e-6).is_err());
    }

    #[test]
    fn lowpass_step_response() {
        let corner = 1e6;
        let rc = 1.0 / (2.0 * std::f64::consts::PI * corner);
        let mut rows = vec![vec![0.0]];
        rows.extend((0..5).map(|_| vec![1.0]));
        let w = VoltageWaveform::uniform(rows, 1e-6).unwrap();
        let os = 100;
        let f = lowpass(&w, corner, os).unwrap();
        assert!(f.filtered);
        let h = 1e-6 / os as f64;
        for (t, row) in f.times().iter().zip(f.steps()) {
            let s = t - 1e-6;
            // mean of 1 - exp(-s/RC) over [s, s + h)
            let expected = if s < -1e-15 {
                0.0
            } else {
                1.0 - rc / h * ((-s / rc).exp() - (-(s + h) / rc).exp())
            };
            assert!((row[0] - expected).abs() < 1e-12, "t = {t}");
        }
    }

    #[test]
    fn lowpass_limits() {
        let rows = vec![vec![2.0, -1.0]; 4];
        let w = VoltageWaveform::uniform(rows, 1e-6).unwrap();
        let f = lowpass(&w, 1e6, 10).unwrap();
        assert!(f.steps().iter().all(|r| (r[0] - 2.0).abs() < 1e-15 && (r[1] + 1.0).abs() < 1e-15));

        let w = VoltageWaveform::uniform(vec![vec![0.0], vec![3.0], vec![-1.0]], 1e-6).unwrap();
        let f = lowpass(&w, 1e18, 4).unwrap();
        for (t, row) in f.times().iter().zip(f.steps()) {
            assert!((row[0] - w.row(w.row_index_at(*t))[0]).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn quantization_error_bounded(vals in proptest::collection::vec(-10.0f64..10.0, 1..40), bits in 8u32..20) {
            let dac = DacSpec { bits, ..DacSpec::default() };
            let w = VoltageWaveform::uniform(vec![vals.clone()], 1e-6).unwrap();
            let q = quantize(&w, &dac).unwrap();
            for (a, b) in vals.iter().zip(q.row(0)) {
                prop_assert!((a - b).abs() <= dac.lsb() / 2.0 * (1.0 + 1e-12));
            }
            let again = quantize(&q, &dac).unwrap();
            prop_assert_eq!(again.steps(), q.steps());
        }
    }
}
