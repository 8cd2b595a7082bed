//! Natural cubic spline on a strictly increasing grid.
//!
//! The second-derivative coefficients depend linearly on the sampled values,
//! so a linear combination of splines on a shared grid is again a spline.
//! Superposed potentials use this to stay exactly linear in the voltages.

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    /// Second derivative at each knot.
    m: Vec<f64>,
    /// Spacing when the grid is uniform to within rounding.
    uniform_step: Option<f64>,
}

/// Returns an error unless `x` is strictly increasing and finite.
pub fn check_grid(x: &[f64]) -> Result<()> {
    if x.len() < 3 {
        return Err(Error::invalid("grid needs at least 3 points"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("grid contains non-finite values"));
    }
    if let Some(i) = x.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::invalid(format!(
            "grid is not strictly increasing at index {}",
            i + 1
        )));
    }
    Ok(())
}

fn detect_uniform(x: &[f64]) -> Option<f64> {
    let n = x.len();
    let h = (x[n - 1] - x[0]) / (n - 1) as f64;
    let tol = 1e-9 * h;
    x.iter()
        .enumerate()
        .all(|(i, &xi)| (xi - (x[0] + i as f64 * h)).abs() <= tol)
        .then_some(h)
}

impl CubicSpline {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        check_grid(&x)?;
        if y.len() != x.len() {
            return Err(Error::invalid(format!(
                "spline has {} abscissae but {} values",
                x.len(),
                y.len()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("spline values must be finite"));
        }
        let m = second_derivatives(&x, &y);
        let uniform_step = detect_uniform(&x);
        Ok(Self {
            x,
            y,
            m,
            uniform_step,
        })
    }

    /// Linear combination `sum_k w_k s_k` of splines sharing one grid.
    pub fn combine(splines: &[&CubicSpline], weights: &[f64]) -> Result<Self> {
        let first = splines
            .first()
            .ok_or_else(|| Error::invalid("cannot combine zero splines"))?;
        if splines.len() != weights.len() {
            return Err(Error::invalid("spline and weight counts differ"));
        }
        if splines.iter().any(|s| s.x != first.x) {
            return Err(Error::invalid("splines do not share a grid"));
        }
        let n = first.x.len();
        let mut y = vec![0.0; n];
        let mut m = vec![0.0; n];
        for (s, &w) in splines.iter().zip(weights) {
            if w == 0.0 {
                continue;
            }
            for i in 0..n {
                y[i] += w * s.y[i];
                m[i] += w * s.m[i];
            }
        }
        Ok(Self {
            x: first.x.clone(),
            y,
            m,
            uniform_step: first.uniform_step,
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    pub fn lower(&self) -> f64 {
        self.x[0]
    }

    pub fn upper(&self) -> f64 {
        self.x[self.x.len() - 1]
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower() && x <= self.upper()
    }

    /// Index `i` of the interval `[x_i, x_{i+1}]` holding `x` (clamped).
    pub fn interval(&self, x: f64) -> usize {
        let n = self.x.len();
        let i = match self.uniform_step {
            Some(h) => {
                let f = ((x - self.x[0]) / h).floor();
                if f.is_nan() || f < 0.0 {
                    0
                } else {
                    f as usize
                }
            }
            None => self.x.partition_point(|&k| k <= x).saturating_sub(1),
        };
        i.min(n - 2)
    }

    fn local(&self, x: f64) -> (usize, f64, f64, f64) {
        let i = self.interval(x);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - x) / h;
        let b = (x - self.x[i]) / h;
        (i, h, a, b)
    }

    pub fn value(&self, x: f64) -> f64 {
        let (i, h, a, b) = self.local(x);
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let (i, h, a, b) = self.local(x);
        (self.y[i + 1] - self.y[i]) / h
            + ((3.0 * b * b - 1.0) * self.m[i + 1] - (3.0 * a * a - 1.0) * self.m[i]) * h / 6.0
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        let (i, _, a, b) = self.local(x);
        a * self.m[i] + b * self.m[i + 1]
    }
}

/// Thomas-algorithm solve for the natural-spline moments.
fn second_derivatives(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    let k = n - 2;
    let mut diag = vec![0.0; k];
    let mut upper = vec![0.0; k];
    let mut rhs = vec![0.0; k];
    for j in 0..k {
        let i = j + 1;
        let h0 = x[i] - x[i - 1];
        let h1 = x[i + 1] - x[i];
        diag[j] = (h0 + h1) / 3.0;
        upper[j] = h1 / 6.0;
        rhs[j] = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
    }
    for j in 1..k {
        let lower = (x[j + 1] - x[j]) / 6.0;
        let w = lower / diag[j - 1];
        diag[j] -= w * upper[j - 1];
        rhs[j] -= w * rhs[j - 1];
    }
    m[k] = rhs[k - 1] / diag[k - 1];
    for j in (0..k - 1).rev() {
        m[j + 1] = (rhs[j] - upper[j] * m[j + 2]) / diag[j];
    }
    m
}
