use std::f64::consts::PI;

use libm::erf;

use crate::constants::angular;
use crate::{Error, Result};

/// Round-trip error-function transport ramp.
///
/// The well minimum follows `f(t) = d/2 (1 + erf((4t/T - 1) sigma) / erf(sigma))`
/// out to the turning point `d` at `T/2` and returns along the mirror image
/// `f(T - t)`, so the trajectory is continuous with `z0(t) = z0(T - t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RampSpec {
    /// One-way transport distance d in m.
    pub distance: f64,
    /// Round-trip duration T in s.
    pub duration: f64,
    /// Slope parameter sigma; larger values give a steeper centre section.
    pub sigma: f64,
    /// DAC update interval in s.
    pub dt_update: f64,
    /// Secular frequency of the transported well in rad/s.
    pub omega_target: f64,
}

impl Default for RampSpec {
    fn default() -> Self {
        Self {
            distance: 2e-3,
            duration: 20e-6,
            sigma: 2.0,
            dt_update: 1e-6,
            omega_target: angular(200e3),
        }
    }
}

impl RampSpec {
    pub fn new(distance: f64, duration: f64, sigma: f64, dt_update: f64, omega_target: f64) -> Result<Self> {
        let spec = Self {
            distance,
            duration,
            sigma,
            dt_update,
            omega_target,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Ramp with round-trip time `tau` trap periods and default distance,
    /// update interval and target frequency.
    pub fn from_tau(tau: f64, sigma: f64) -> Result<Self> {
        let base = Self::default();
        Self::new(
            base.distance,
            tau * 2.0 * PI / base.omega_target,
            sigma,
            base.dt_update,
            base.omega_target,
        )
    }

    pub fn with_tau(self, tau: f64) -> Result<Self> {
        Self::new(
            self.distance,
            tau * 2.0 * PI / self.omega_target,
            self.sigma,
            self.dt_update,
            self.omega_target,
        )
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("distance", self.distance),
            ("duration", self.duration),
            ("sigma", self.sigma),
            ("dt_update", self.dt_update),
            ("omega_target", self.omega_target),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("ramp {name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// tau = T omega / 2 pi.
    pub fn tau(&self) -> f64 {
        self.duration * self.omega_target / (2.0 * PI)
    }

    /// Number of hold intervals, ceil(T / dt_update).
    pub fn update_count(&self) -> usize {
        let r = self.duration / self.dt_update;
        let n = r.round();
        if (r - n).abs() <= 1e-9 * r.max(1.0) {
            n as usize
        } else {
            r.ceil() as usize
        }
    }

    /// True when T is an integer number of update intervals.
    pub fn is_commensurate(&self) -> bool {
        let r = self.duration / self.dt_update;
        (r - r.round()).abs() <= 1e-9 * r.max(1.0)
    }

    /// Time of update `k`, clamped to T.
    pub fn update_time(&self, k: usize) -> f64 {
        if k >= self.update_count() {
            self.duration
        } else {
            (k as f64 * self.dt_update).min(self.duration)
        }
    }

    /// Minimum position latched at update `k`. When T is commensurate with
    /// the update interval, samples `k` and `n - k` are bit-identical.
    pub fn held_position(&self, k: usize) -> f64 {
        let n = self.update_count();
        let k = k.min(n);
        if self.is_commensurate() {
            let j = k.min(n - k);
            self.one_way(j as f64 * self.dt_update)
        } else {
            let t = self.update_time(k);
            self.one_way(if t <= self.duration / 2.0 { t } else { self.duration - t })
        }
    }

    fn one_way(&self, t: f64) -> f64 {
        let s = self.sigma;
        0.5 * self.distance * (1.0 + erf((4.0 * t / self.duration - 1.0) * s) / erf(s))
    }

    fn one_way_velocity(&self, t: f64) -> f64 {
        let s = self.sigma;
        let x = (4.0 * t / self.duration - 1.0) * s;
        0.5 * self.distance * (4.0 * s / self.duration) * (2.0 / PI.sqrt()) * (-x * x).exp() / erf(s)
    }
}

/// Well minimum z0(t) of the round-trip ramp, 0 <= t <= T.
pub fn ramp_position(spec: &RampSpec, t: f64) -> Result<f64> {
    if !(0.0..=spec.duration).contains(&t) {
        return Err(Error::invalid(format!(
            "t = {t} outside ramp interval [0, {}]",
            spec.duration
        )));
    }
    let half = spec.duration / 2.0;
    Ok(if t <= half {
        spec.one_way(t)
    } else {
        spec.one_way(spec.duration - t)
    })
}

/// Time derivative of [`ramp_position`]; at T/2 the outbound value is used.
pub fn ramp_velocity(spec: &RampSpec, t: f64) -> Result<f64> {
    if !(0.0..=spec.duration).contains(&t) {
        return Err(Error::invalid(format!(
            "t = {t} outside ramp interval [0, {}]",
            spec.duration
        )));
    }
    let half = spec.duration / 2.0;
    Ok(if t <= half {
        spec.one_way_velocity(t)
    } else {
        -spec.one_way_velocity(spec.duration - t)
    })
}
