use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use super::{scattering_rate, LaserParams};
use crate::constants::{ev_to_joule, HBAR};
use crate::table;
use crate::trap_model::IonSpecies;
use crate::{Error, Result};

/// Detected photon rate per time bin after a motional excitation.
#[derive(Debug, Clone, PartialEq)]
pub struct FluorescenceTrace {
    /// Bin centres in s.
    pub times: Vec<f64>,
    /// Detected counts per second.
    pub rates: Vec<f64>,
    /// Bin width in s.
    pub bin: f64,
    /// Reference rate of the cold ion.
    pub steady_state_rate: f64,
    /// First time the rate reaches 90 % of the steady state, linearly
    /// interpolated between bin centres; zero if the first bin already does.
    /// `None` when the rate never crosses before the reference window.
    pub t_recover: Option<f64>,
}

impl FluorescenceTrace {
    /// Builds a trace from uniformly spaced bin centres and rates. The
    /// steady state is the mean over the last tenth of the bins.
    pub fn from_rates(times: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        check_bins(&times, &rates)?;
        let n = rates.len();
        let window = (n / 10).max(1);
        let steady = rates[n - window..].iter().sum::<f64>() / window as f64;
        Self::build(times, rates, steady, n - window)
    }

    /// Builds a trace with a known steady-state rate, e.g. from a model.
    pub fn with_steady_state(times: Vec<f64>, rates: Vec<f64>, steady_state_rate: f64) -> Result<Self> {
        check_bins(&times, &rates)?;
        if !(steady_state_rate > 0.0 && steady_state_rate.is_finite()) {
            return Err(Error::invalid("steady-state rate must be > 0"));
        }
        let n = rates.len();
        Self::build(times, rates, steady_state_rate, n)
    }

    /// `resolved_before`: crossings at or after this bin count as unresolved.
    fn build(times: Vec<f64>, rates: Vec<f64>, steady: f64, resolved_before: usize) -> Result<Self> {
        let bin = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
        let threshold = 0.9 * steady;
        let t_recover = match rates.iter().position(|&r| r >= threshold) {
            Some(0) => Some(0.0),
            Some(j) if j < resolved_before => {
                Some(interpolate_crossing(times[j - 1], times[j] - times[j - 1], rates[j - 1], rates[j], threshold))
            }
            _ => None,
        };
        Ok(Self {
            times,
            rates,
            bin,
            steady_state_rate: steady,
            t_recover,
        })
    }

    pub fn duration(&self) -> f64 {
        self.times.len() as f64 * self.bin
    }

    /// Rows `t_ms, detected_counts_per_s` with a comment header.
    pub fn to_table(&self) -> String {
        let mut w = table::TableWriter::new();
        w.columns(&["t_ms", "detected_counts_per_s"]);
        for (t, r) in self.times.iter().zip(&self.rates) {
            w.row_exact(&[t * 1e3, *r]);
        }
        w.finish()
    }

    pub fn from_table(text: &str) -> Result<Self> {
        let parsed = table::parse(text)?;
        let mut times = Vec::with_capacity(parsed.rows.len());
        let mut rates = Vec::with_capacity(parsed.rows.len());
        for row in &parsed.rows {
            if row.values.len() != 2 {
                return Err(Error::parse(row.line, "expected `t_ms, detected_counts_per_s`"));
            }
            times.push(row.values[0] * 1e-3);
            rates.push(row.values[1]);
        }
        Self::from_rates(times, rates)
    }
}

/// Largest derivative of the Hermite segment between two knots.
fn segment_max_rate(k0: (f64, f64, f64), k1: (f64, f64, f64)) -> f64 {
    let h = k1.0 - k0.0;
    let slope = (k1.1 - k0.1) / h;
    // dN/dt = a x^2 + b x + c on x in [0, 1]
    let a = 3.0 * (k0.2 + k1.2) - 6.0 * slope;
    let b = 6.0 * slope - 4.0 * k0.2 - 2.0 * k1.2;
    let mut best = k0.2.max(k1.2);
    if a < 0.0 {
        let x = -b / (2.0 * a);
        if x > 0.0 && x < 1.0 {
            best = best.max(k0.2 + x * (b + a * x));
        }
    }
    best
}

/// Linear interpolation of the time where the rate passes `threshold`
/// between bin centres `t0` and `t0 + dt`.
fn interpolate_crossing(t0: f64, dt: f64, r0: f64, r1: f64, threshold: f64) -> f64 {
    t0 + (threshold - r0) / (r1 - r0) * dt
}

fn check_bins(times: &[f64], rates: &[f64]) -> Result<()> {
    if times.len() != rates.len() || times.len() < 10 {
        return Err(Error::invalid("trace needs at least 10 bins with one rate each"));
    }
    if rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
        return Err(Error::invalid("trace rates must be finite and >= 0"));
    }
    let bin = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    if !(bin > 0.0)
        || times
            .iter()
            .enumerate()
            .any(|(j, t)| (t - times[0] - j as f64 * bin).abs() > 1e-6 * bin)
    {
        return Err(Error::invalid("trace bins must be uniformly spaced and increasing"));
    }
    Ok(())
}

/// Phase averages of the scattering rate and of rate times velocity over
/// one cycle of a coherent oscillation with energy `energy` (J) about the
/// beam centre: `z = A cos(phi)`, `v = -A omega sin(phi)`.
pub fn cycle_averages(energy: f64, laser: &LaserParams, omega: f64, mass: f64) -> (f64, f64) {
    let amp = (2.0 * energy.max(0.0) / (mass * omega * omega)).sqrt();
    let vmax = amp * omega;
    let k = laser.k_axial.abs() * laser.wavenumber();
    let v_width = 0.5 * laser.gamma * (1.0 + laser.s0).sqrt() / k.max(f64::MIN_POSITIVE);
    // trapezoid rule on a periodic integrand: a few points per feature width
    let features = (vmax / v_width).max(amp / laser.w0);
    let n = ((8.0 * 2.0 * PI * features).ceil() as usize).clamp(64, 1 << 17);
    let n = n.next_multiple_of(4);
    let (mut r_sum, mut rv_sum) = (0.0, 0.0);
    for j in 0..n {
        let phi = 2.0 * PI * j as f64 / n as f64;
        let (s, c) = phi.sin_cos();
        let v = -vmax * s;
        let r = scattering_rate(v, amp * c, laser);
        r_sum += r;
        rv_sum += r * v;
    }
    (r_sum / n as f64, rv_sum / n as f64)
}

/// Cycle-averaged energy balance: radiation-pressure work plus recoil
/// heating from absorption along the beam and isotropic emission.
fn energy_rate(energy: f64, laser: &LaserParams, omega: f64, mass: f64) -> (f64, f64) {
    let (r, rv) = cycle_averages(energy, laser, omega, mass);
    let hk = HBAR * laser.wavenumber();
    let recoil = hk * hk * (laser.k_axial * laser.k_axial + 1.0 / 3.0) / (2.0 * mass);
    (hk * laser.k_axial * rv + recoil * r, r)
}

/// Energy (J) at which cooling and recoil heating balance; `None` when
/// the laser heats at every energy.
fn equilibrium_energy(laser: &LaserParams, omega: f64, mass: f64) -> Option<f64> {
    let (mut lo, mut hi) = (ev_to_joule(1e-12).ln(), ev_to_joule(1e-2).ln());
    if energy_rate(hi.exp(), laser, omega, mass).0 >= 0.0 {
        return None;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if energy_rate(mid.exp(), laser, omega, mass).0 > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some((0.5 * (lo + hi)).exp())
}

/// Cumulative number of scattered photons after an excitation, stored at
/// the integrator steps and interpolated with cubic Hermite segments.
#[derive(Debug, Clone)]
pub(crate) struct RecoveryCurve {
    /// `(t, photons, rate)` at each step.
    knots: Vec<(f64, f64, f64)>,
    /// Scattering rate at the cooling equilibrium.
    pub(crate) rate_eq: f64,
    /// True when the energy has settled at the equilibrium at the last knot.
    pub(crate) settled: bool,
}

impl RecoveryCurve {
    /// Integrates the cycle-averaged energy balance from `e0` (J) above
    /// the equilibrium until it settles or `t_max` is reached.
    pub(crate) fn new(e0: f64, laser: &LaserParams, omega: f64, mass: f64, t_max: f64) -> Result<Self> {
        let e_eq = equilibrium_energy(laser, omega, mass)
            .ok_or_else(|| Error::invalid("laser does not cool: detuning must be red of resonance"))?;
        let f = |e: f64| energy_rate(e.max(0.0), laser, omega, mass);
        let rate_eq = f(e_eq).1;
        let slope = (f(1.01 * e_eq).0 - f(0.99 * e_eq).0) / (0.02 * e_eq);
        let relax = 1.0 / slope.abs().max(f64::MIN_POSITIVE);

        let (mut t, mut n, mut e) = (0.0, 0.0, e_eq + e0);
        let mut knots = vec![(0.0, 0.0, f(e).1)];
        let mut settled = false;
        while t < t_max {
            if (e - e_eq).abs() <= 1e-9 * e_eq {
                settled = true;
                break;
            }
            let (k1, r1) = f(e);
            // 2 % change of ln E per step, relaxation time near equilibrium
            let mut h = 0.02 * e / k1.abs().max(f64::MIN_POSITIVE);
            if e < 2.0 * e_eq {
                h = h.min(relax);
            }
            h = h.min(t_max - t);
            let (k2, r2) = f(e + 0.5 * h * k1);
            let (k3, r3) = f(e + 0.5 * h * k2);
            let (k4, r4) = f(e + h * k3);
            e += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            n += h / 6.0 * (r1 + 2.0 * r2 + 2.0 * r3 + r4);
            t += h;
            knots.push((t, n, f(e).1));
        }
        Ok(Self {
            knots,
            rate_eq,
            settled,
        })
    }

    /// Photons scattered in `[0, t]`; constant equilibrium rate after the end.
    pub(crate) fn photons(&self, t: f64) -> f64 {
        let last = self.knots[self.knots.len() - 1];
        if t >= last.0 {
            let rate = if self.settled { self.rate_eq } else { last.2 };
            return last.1 + rate * (t - last.0);
        }
        let i = self.knots.partition_point(|k| k.0 <= t).max(1) - 1;
        let (t0, n0, r0) = self.knots[i];
        let (t1, n1, r1) = self.knots[i + 1];
        let h = t1 - t0;
        let x = (t - t0) / h;
        let (x2, x3) = (x * x, x * x * x);
        (2.0 * x3 - 3.0 * x2 + 1.0) * n0
            + (x3 - 2.0 * x2 + x) * h * r0
            + (-2.0 * x3 + 3.0 * x2) * n1
            + (x3 - x2) * h * r1
    }

    /// First 90 % crossing of the binned rate, as in a trace with bins of
    /// width `bin`; `None` if it does not happen before `t_max`.
    pub(crate) fn crossing(&self, bin: f64, t_max: f64) -> Option<f64> {
        let threshold = 0.9 * self.rate_eq;
        let rate = |j: usize| (self.photons((j + 1) as f64 * bin) - self.photons(j as f64 * bin)) / bin;
        // a bin average cannot exceed the largest instantaneous rate, so
        // bins before the first segment reaching the threshold are skipped
        let start = match self.knots.windows(2).position(|w| segment_max_rate(w[0], w[1]) >= threshold) {
            Some(i) => self.knots[i].0,
            None => {
                let last = self.knots[self.knots.len() - 1];
                if !self.settled && last.2 < threshold {
                    return None;
                }
                last.0
            }
        };
        let mut j = ((start / bin).floor() as usize).max(1);
        let mut prev = rate(j - 1);
        if j == 1 && prev >= threshold {
            return Some(0.0);
        }
        while (j as f64 + 0.5) * bin <= t_max {
            let r = rate(j);
            if r >= threshold {
                return Some(interpolate_crossing((j as f64 - 0.5) * bin, bin, prev, r, threshold));
            }
            prev = r;
            j += 1;
        }
        None
    }

    /// Detected trace with `bins` bins of width `bin`.
    pub(crate) fn trace(&self, eta: f64, bin: f64, bins: usize) -> Result<FluorescenceTrace> {
        let mut times = Vec::with_capacity(bins);
        let mut rates = Vec::with_capacity(bins);
        let mut prev = 0.0;
        for j in 0..bins {
            let next = self.photons((j + 1) as f64 * bin);
            times.push((j as f64 + 0.5) * bin);
            rates.push((eta * (next - prev) / bin).max(0.0));
            prev = next;
        }
        FluorescenceTrace::with_steady_state(times, rates, eta * self.rate_eq)
    }
}

fn check_recovery_inputs(e0: f64, laser: &LaserParams, omega_z: f64, bin: f64) -> Result<()> {
    laser.validate()?;
    if !(e0 >= 0.0 && e0.is_finite()) {
        return Err(Error::invalid(format!("initial energy must be >= 0, got {e0}")));
    }
    if !(omega_z > 0.0 && bin > 0.0) {
        return Err(Error::invalid("need omega_z > 0 and bin > 0"));
    }
    Ok(())
}

/// Fluorescence trace of a coherently excited ion while it is Doppler
/// cooled, from the cycle-averaged energy balance.
///
/// The ion starts with `e0` (eV) on top of the cooling equilibrium, so
/// `e0 = 0` gives a flat trace. Each bin holds the detected rate averaged
/// over the bin; the steady state is the rate at the equilibrium.
pub fn simulate_recovery(
    e0: f64,
    laser: &LaserParams,
    omega_z: f64,
    species: &IonSpecies,
    duration: f64,
    bin: f64,
) -> Result<FluorescenceTrace> {
    check_recovery_inputs(e0, laser, omega_z, bin)?;
    if !(duration >= 10.0 * bin) {
        return Err(Error::invalid("trace needs at least 10 bins"));
    }
    let bins = (duration / bin).round() as usize;
    let curve = RecoveryCurve::new(ev_to_joule(e0), laser, omega_z, species.mass, bins as f64 * bin)?;
    curve.trace(laser.detection_efficiency, bin, bins)
}

/// Recovery time of the model for an excitation `e0` (eV) with bins of
/// width `bin`, or `None` when it exceeds `t_max`.
pub fn recovery_time(
    e0: f64,
    laser: &LaserParams,
    omega_z: f64,
    species: &IonSpecies,
    bin: f64,
    t_max: f64,
) -> Result<Option<f64>> {
    check_recovery_inputs(e0, laser, omega_z, bin)?;
    let curve = RecoveryCurve::new(ev_to_joule(e0), laser, omega_z, species.mass, t_max)?;
    Ok(curve.crossing(bin, t_max))
}

/// Replaces every bin by a Poisson draw of its expected count.
pub fn add_shot_noise<R: Rng + ?Sized>(trace: &FluorescenceTrace, rng: &mut R) -> Result<FluorescenceTrace> {
    let rates = trace
        .rates
        .iter()
        .map(|r| {
            let mean = r * trace.bin;
            if mean <= 0.0 {
                return Ok(0.0);
            }
            Poisson::new(mean)
                .map(|p| p.sample(rng) / trace.bin)
                .map_err(|e| Error::invalid(format!("shot noise: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    FluorescenceTrace::from_rates(trace.times.clone(), rates)
}
