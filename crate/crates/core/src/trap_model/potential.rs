use super::basis::AxialBasis;
use crate::spline::CubicSpline;
use crate::{Error, Result};

/// Tabulated axial potential phi(z) in volt.
#[derive(Debug, Clone, PartialEq)]
pub struct AxialPotential {
    spline: CubicSpline,
}

impl AxialPotential {
    pub fn from_samples(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Ok(Self {
            spline: CubicSpline::new(grid, values)?,
        })
    }

    pub fn from_fn(grid: &[f64], f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_samples(grid.to_vec(), grid.iter().map(|&z| f(z)).collect())
    }

    pub fn grid(&self) -> &[f64] {
        self.spline.knots()
    }

    /// Potential at the grid points.
    pub fn samples(&self) -> &[f64] {
        self.spline.values()
    }

    pub fn value(&self, z: f64) -> f64 {
        self.spline.value(z)
    }

    pub fn gradient(&self, z: f64) -> f64 {
        self.spline.derivative(z)
    }

    pub fn curvature(&self, z: f64) -> f64 {
        self.spline.second_derivative(z)
    }

    pub fn contains(&self, z: f64) -> bool {
        self.spline.contains(z)
    }

    pub fn spline(&self) -> &CubicSpline {
        &self.spline
    }
}

/// phi(z) = sum_i U_i phi_i(z).
pub fn superpose(basis: &AxialBasis, voltages: &[f64]) -> Result<AxialPotential> {
    if voltages.len() != basis.electrode_count() {
        return Err(Error::invalid(format!(
            "{} voltages supplied for {} electrodes",
            voltages.len(),
            basis.electrode_count()
        )));
    }
    if voltages.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("voltages must be finite"));
    }
    let splines: Vec<&CubicSpline> = basis.splines().iter().collect();
    Ok(AxialPotential {
        spline: CubicSpline::combine(&splines, voltages)?,
    })
}
