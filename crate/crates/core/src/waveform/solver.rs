use nalgebra::{DMatrix, DVector};

use crate::trap_model::{superpose, well_analysis, AxialBasis, IonSpecies, WellOptions};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Tikhonov weight on the voltage vector, in V^-2 relative to the
    /// mean squared potential residual.
    pub lambda: f64,
    pub v_min: f64,
    pub v_max: f64,
    /// Half-width of the matched region around the target minimum, in m.
    pub fit_half_window: f64,
    /// Number of sample points across the matched region.
    pub fit_samples: usize,
    /// Weight of the zero-gradient condition at the target minimum,
    /// relative to the mean squared potential residual.
    pub gradient_weight: f64,
    /// Allowed relative deviation of the achieved secular frequency.
    pub omega_tolerance: f64,
    /// Allowed deviation of the achieved minimum from the target, in m.
    pub position_tolerance: f64,
    pub well: WellOptions,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-9,
            v_min: -10.0,
            v_max: 10.0,
            fit_half_window: 0.75e-3,
            fit_samples: 61,
            gradient_weight: 100.0,
            omega_tolerance: 0.01,
            position_tolerance: 1e-6,
            well: WellOptions::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_min < self.v_max) {
            return Err(Error::invalid(format!(
                "voltage range [{}, {}] is empty",
                self.v_min, self.v_max
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.gradient_weight >= 0.0 && self.gradient_weight.is_finite()) {
            return Err(Error::invalid("gradient weight must be >= 0"));
        }
        if !(self.fit_half_window > 0.0) || self.fit_samples < 3 {
            return Err(Error::invalid("fit window needs positive width and at least 3 samples"));
        }
        if !(self.omega_tolerance > 0.0 && self.position_tolerance > 0.0) {
            return Err(Error::invalid("solver tolerances must be > 0"));
        }
        Ok(())
    }
}

/// Target harmonic well: minimum position (m) and secular frequency (rad/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveTarget {
    pub z0: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoltageSolution {
    pub voltages: Vec<f64>,
    /// Unpenalised constant potential offset of the fit, in V.
    pub offset: f64,
    pub omega_achieved: f64,
    pub z_min: f64,
    /// True when the range constraint was active.
    pub clipped: bool,
}

/// Regularised least-squares problem
/// `(1/n) |A U + c - b|^2 + lambda |U|^2` over voltages `U` and a free
/// offset `c`, with `A[j][i] = phi_i(z_j)` and `b_j = m omega^2 (z_j - z0)^2 / 2Q`.
/// One extra row penalises the gradient of the potential at `z0`, so the
/// minimum sits at the target rather than wherever the residual tilts it.
#[derive(Debug, Clone)]
pub struct LeastSquaresProblem {
    /// Design matrix with the offset column appended last.
    design: DMatrix<f64>,
    rhs: DVector<f64>,
    lambda: f64,
    has_gradient_row: bool,
}

impl LeastSquaresProblem {
    pub fn new(
        basis: &AxialBasis,
        target: SolveTarget,
        config: &SolverConfig,
        species: &IonSpecies,
    ) -> Result<Self> {
        config.validate()?;
        if !basis.contains(target.z0) {
            return Err(Error::invalid(format!(
                "target minimum {} m lies outside the basis grid",
                target.z0
            )));
        }
        if !(target.omega >= 0.0 && target.omega.is_finite()) {
            return Err(Error::invalid(format!("target omega must be >= 0, got {}", target.omega)));
        }
        let w = config.fit_half_window;
        let n = config.fit_samples;
        let zs: Vec<f64> = (0..n)
            .map(|j| target.z0 - w + 2.0 * w * j as f64 / (n - 1) as f64)
            .collect();
        if !basis.contains(zs[0]) || !basis.contains(zs[n - 1]) {
            return Err(Error::invalid(format!(
                "fit window around {} m leaves the basis grid",
                target.z0
            )));
        }
        let k = species.curvature_for(target.omega);
        let ne = basis.electrode_count();
        let g = (config.gradient_weight * n as f64).sqrt() * w;
        let design = DMatrix::from_fn(n + 1, ne + 1, |j, i| match (j == n, i == ne) {
            (false, false) => basis.eval(i, zs[j]),
            (false, true) => 1.0,
            (true, false) => g * basis.spline(i).derivative(target.z0),
            (true, true) => 0.0,
        });
        let rhs = DVector::from_iterator(
            n + 1,
            zs.iter().map(|z| 0.5 * k * (z - target.z0).powi(2)).chain([0.0]),
        );
        Ok(Self {
            design,
            rhs,
            lambda: config.lambda,
            has_gradient_row: true,
        })
    }

    /// Problem from an explicit design matrix whose last column is the
    /// unpenalised offset.
    pub fn from_parts(design: DMatrix<f64>, rhs: DVector<f64>, lambda: f64) -> Self {
        Self {
            design,
            rhs,
            lambda,
            has_gradient_row: false,
        }
    }

    /// Number of potential samples; the gradient row is not counted.
    fn sample_count(&self) -> usize {
        self.design.nrows() - usize::from(self.has_gradient_row)
    }

    pub fn electrode_count(&self) -> usize {
        self.design.ncols() - 1
    }

    fn normal_matrix(&self) -> (DMatrix<f64>, DVector<f64>) {
        let n = self.sample_count() as f64;
        let ne = self.electrode_count();
        let mut m = self.design.transpose() * &self.design / n;
        for i in 0..ne {
            m[(i, i)] += self.lambda;
        }
        let r = self.design.transpose() * &self.rhs / n;
        (m, r)
    }

    /// Minimiser with some voltages pinned; returns `(voltages, offset)`.
    pub fn solve_with(&self, pinned: &[Option<f64>]) -> Result<(Vec<f64>, f64)> {
        let ne = self.electrode_count();
        if pinned.len() != ne {
            return Err(Error::invalid("pinned vector length differs from electrode count"));
        }
        let (m, r) = self.normal_matrix();
        let free: Vec<usize> = (0..=ne).filter(|&i| i == ne || pinned[i].is_none()).collect();
        let mut rr = DVector::from_iterator(free.len(), free.iter().map(|&i| r[i]));
        for (a, &i) in free.iter().enumerate() {
            for (j, p) in pinned.iter().enumerate() {
                if let Some(v) = p {
                    rr[a] -= m[(i, j)] * v;
                }
            }
        }
        let mm = DMatrix::from_fn(free.len(), free.len(), |a, b| m[(free[a], free[b])]);
        let x = match mm.clone().cholesky() {
            Some(ch) => ch.solve(&rr),
            None => mm
                .lu()
                .solve(&rr)
                .ok_or_else(|| Error::invalid("singular voltage fit; increase lambda"))?,
        };
        let mut u: Vec<f64> = pinned.iter().map(|p| p.unwrap_or(0.0)).collect();
        let mut offset = 0.0;
        for (a, &i) in free.iter().enumerate() {
            if i == ne {
                offset = x[a];
            } else {
                u[i] = x[a];
            }
        }
        Ok((u, offset))
    }

    pub fn solve(&self) -> Result<(Vec<f64>, f64)> {
        self.solve_with(&vec![None; self.electrode_count()])
    }

    pub fn objective(&self, voltages: &[f64], offset: f64) -> f64 {
        let n = self.sample_count();
        let ne = self.electrode_count();
        let mut acc = 0.0;
        for j in 0..self.design.nrows() {
            let mut s = self.design[(j, ne)] * offset - self.rhs[j];
            for (i, u) in voltages.iter().enumerate().take(ne) {
                s += self.design[(j, i)] * u;
            }
            acc += s * s;
        }
        acc / n as f64 + self.lambda * voltages.iter().map(|v| v * v).sum::<f64>()
    }

    /// Relative residual of the regularised normal equations at `(U, c)`.
    pub fn normal_residual(&self, voltages: &[f64], offset: f64) -> f64 {
        let (m, r) = self.normal_matrix();
        let mut x = DVector::from_column_slice(voltages).push(offset);
        x = &m * x - &r;
        x.norm() / r.norm().max(f64::MIN_POSITIVE)
    }
}

fn check_tolerance(
    basis: &AxialBasis,
    voltages: &[f64],
    target: SolveTarget,
    config: &SolverConfig,
    species: &IonSpecies,
) -> Result<(f64, f64)> {
    let potential = superpose(basis, voltages)?;
    let w = config.fit_half_window;
    let lo = (target.z0 - w).max(basis.grid()[0]);
    let hi = (target.z0 + w).min(*basis.grid().last().unwrap());
    let infeasible = |reason: String| Error::Infeasible {
        step: None,
        omega_achieved: f64::NAN,
        z_min: f64::NAN,
        reason,
    };
    let well = well_analysis(&potential, species, (lo, hi), config.well)
        .map_err(|e| infeasible(format!("no well near target: {e}")))?;
    let dw = (well.omega_z - target.omega).abs() / target.omega;
    let dz = (well.z_min - target.z0).abs();
    if dw > config.omega_tolerance || dz > config.position_tolerance {
        return Err(Error::Infeasible {
            step: None,
            omega_achieved: well.omega_z,
            z_min: well.z_min,
            reason: format!("frequency error {dw:.3e}, position error {dz:.3e} m"),
        });
    }
    Ok((well.omega_z, well.z_min))
}

/// Electrode voltages realising a harmonic well at `target`.
///
/// The unconstrained minimiser must meet the frequency and position
/// tolerances. Entries outside the voltage range are then pinned to the
/// bound, the remaining ones re-solved once and clamped, and the
/// tolerances checked again.
pub fn solve_voltages(
    basis: &AxialBasis,
    target: SolveTarget,
    config: &SolverConfig,
    species: &IonSpecies,
) -> Result<VoltageSolution> {
    let problem = LeastSquaresProblem::new(basis, target, config, species)?;
    let (u, offset) = problem.solve()?;
    if target.omega == 0.0 {
        return Ok(VoltageSolution {
            voltages: u,
            offset,
            omega_achieved: 0.0,
            z_min: target.z0,
            clipped: false,
        });
    }
    let (omega_achieved, z_min) = check_tolerance(basis, &u, target, config, species)?;
    let inside = |v: &f64| *v >= config.v_min && *v <= config.v_max;
    if u.iter().all(inside) {
        return Ok(VoltageSolution {
            voltages: u,
            offset,
            omega_achieved,
            z_min,
            clipped: false,
        });
    }

    let pinned: Vec<Option<f64>> = u
        .iter()
        .map(|&v| (!inside(&v)).then(|| v.clamp(config.v_min, config.v_max)))
        .collect();
    let (mut u, offset) = problem.solve_with(&pinned)?;
    for v in &mut u {
        *v = v.clamp(config.v_min, config.v_max);
    }
    let (omega_achieved, z_min) = check_tolerance(basis, &u, target, config, species)
        .map_err(|e| match e {
            Error::Infeasible {
                step,
                omega_achieved,
                z_min,
                reason,
            } => Error::Infeasible {
                step,
                omega_achieved,
                z_min,
                reason: format!("voltage limits active: {reason}"),
            },
            other => other,
        })?;
    Ok(VoltageSolution {
        voltages: u,
        offset,
        omega_achieved,
        z_min,
        clipped: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::angular;
    use crate::trap_model::{analytic_basis, default_grid, Provenance, TrapGeometry};

    fn standard_basis() -> AxialBasis {
        let g = TrapGeometry::standard();
        analytic_basis(&g, 1e-3, &default_grid(&g)).unwrap()
    }

    #[test]
    fn flat_target_gives_zero() {
        let b = standard_basis();
        let ca = IonSpecies::calcium40();
        let s = solve_voltages(&b, SolveTarget { z0: 0.0, omega: 0.0 }, &SolverConfig::default(), &ca).unwrap();
        assert!(s.voltages.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn meets_tolerance_on_analytic_basis() {
        let b = standard_basis();
        let ca = IonSpecies::calcium40();
        let cfg = SolverConfig::default();
        for z0 in [0.0, 0.7e-3, 2e-3] {
            let t = SolveTarget { z0, omega: angular(200e3) };
            let s = solve_voltages(&b, t, &cfg, &ca).unwrap();
            assert!((s.omega_achieved / t.omega - 1.0).abs() <= 0.01);
            assert!((s.z_min - z0).abs() <= 1e-6);
            assert!(s.voltages.iter().all(|v| v.abs() <= 10.0));
        }
    }

    #[test]
    fn normal_equations_hold() {
        let b = standard_basis();
        let ca = IonSpecies::calcium40();
        let cfg = SolverConfig::default();
        let p = LeastSquaresProblem::new(&b, SolveTarget { z0: 0.3e-3, omega: angular(150e3) }, &cfg, &ca).unwrap();
        let (u, c) = p.solve().unwrap();
        assert!(p.normal_residual(&u, c) < 1e-10);
    }

    #[test]
    fn tight_limits_are_infeasible() {
        let b = standard_basis();
        let ca = IonSpecies::calcium40();
        let cfg = SolverConfig { v_min: -0.01, v_max: 0.01, ..SolverConfig::default() };
        let err = solve_voltages(&b, SolveTarget { z0: 0.0, omega: angular(200e3) }, &cfg, &ca).unwrap_err();
        assert!(matches!(err, Error::Infeasible { .. }));
    }

    #[test]
    fn single_electrode_matches_brute_force() {
        let grid: Vec<f64> = (0..=400).map(|k| -2e-3 + k as f64 * 1e-5).collect();
        let phi = vec![grid.iter().map(|z| (-(z / 1e-3).powi(2)).exp()).collect()];
        let b = AxialBasis::new(grid, phi, Provenance::Imported).unwrap();
        let ca = IonSpecies::calcium40();
        let cfg = SolverConfig { lambda: 1e-4, ..SolverConfig::default() };
        let p = LeastSquaresProblem::new(&b, SolveTarget { z0: 0.0, omega: angular(50e3) }, &cfg, &ca).unwrap();
        let (u, c) = p.solve().unwrap();
        // the optimal offset for fixed U is the mean residual
        // the last row is the gradient condition, zero at the centre of the bump
        let n = p.rhs.len() - 1;
        let best_c = |v: f64| (0..n).map(|j| p.rhs[j] - p.design[(j, 0)] * v).sum::<f64>() / n as f64;
        let mut best = (f64::MAX, 0.0);
        for k in -10_000..=10_000 {
            let v = k as f64 * 1e-3;
            let f = p.objective(&[v], best_c(v));
            if f < best.0 {
                best = (f, v);
            }
        }
        assert!((u[0] - best.1).abs() <= 0.5e-3 + 1e-12);
        assert!(p.objective(&u, c) <= best.0 + 1e-15);
    }
}
