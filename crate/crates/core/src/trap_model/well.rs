use nalgebra::{Matrix3, Vector3};

use super::potential::AxialPotential;
use super::species::IonSpecies;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WellCharacterization {
    /// Position of the potential minimum in m.
    pub z_min: f64,
    /// Secular frequency in rad/s.
    pub omega_z: f64,
    /// Lowest escape barrier above the minimum, in eV.
    pub axial_depth: f64,
    /// Fitted potential curvature phi'' in V/m^2.
    pub curvature: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WellOptions {
    /// Half-width of the quadratic least-squares fit around the minimum.
    pub fit_half_width: f64,
}

impl Default for WellOptions {
    fn default() -> Self {
        // one experimental-zone electrode width
        Self {
            fit_half_width: 0.5e-3,
        }
    }
}

/// Refines a minimum bracketed by grid points `lo < hi` on the spline.
fn refine(potential: &AxialPotential, mut lo: f64, mut hi: f64) -> f64 {
    let (glo, ghi) = (potential.gradient(lo), potential.gradient(hi));
    if glo < 0.0 && ghi > 0.0 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if potential.gradient(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        return 0.5 * (lo + hi);
    }
    // golden section on the value when the gradient does not bracket
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - r * (hi - lo);
    let mut d = lo + r * (hi - lo);
    for _ in 0..200 {
        if potential.value(c) < potential.value(d) {
            hi = d;
        } else {
            lo = c;
        }
        c = hi - r * (hi - lo);
        d = lo + r * (hi - lo);
        if hi - lo <= 1e-15 * (1.0 + lo.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Lowest interior local minimum of the tabulated potential in `[lo, hi]`.
pub fn find_local_minimum(potential: &AxialPotential, lo: f64, hi: f64) -> Result<f64> {
    let grid = potential.grid();
    let vals = potential.samples();
    let start = grid.partition_point(|&z| z < lo);
    let end = grid.partition_point(|&z| z <= hi);
    let mut best: Option<usize> = None;
    for j in start.max(1)..end.min(grid.len() - 1) {
        if j == start || j + 1 == end {
            continue;
        }
        let is_min = vals[j] < vals[j - 1] && vals[j] <= vals[j + 1];
        if is_min && best.is_none_or(|b| vals[j] < vals[b]) {
            best = Some(j);
        }
    }
    let j = best.ok_or(Error::NoWell { lo, hi })?;
    Ok(refine(potential, grid[j - 1], grid[j + 1]))
}

/// Walks downhill on the grid from `start` and refines the minimum reached.
/// Returns `None` when the walk runs off the grid.
pub fn descend_to_minimum(potential: &AxialPotential, start: f64) -> Option<f64> {
    let grid = potential.grid();
    let vals = potential.samples();
    let n = grid.len();
    let mut j = grid.partition_point(|&z| z < start).min(n - 1);
    loop {
        if j == 0 || j == n - 1 {
            return None;
        }
        if vals[j - 1] < vals[j] {
            j -= 1;
        } else if vals[j + 1] < vals[j] {
            j += 1;
        } else {
            break;
        }
    }
    Some(refine(potential, grid[j - 1], grid[j + 1]))
}

/// Least-squares fit of a + b x + c x^2 with x = z - centre; returns phi''.
fn quadratic_curvature(points: &[(f64, f64)], centre: f64, scale: f64) -> Option<f64> {
    let mut ata = Matrix3::<f64>::zeros();
    let mut atb = Vector3::<f64>::zeros();
    for &(z, v) in points {
        let x = (z - centre) / scale;
        let row = Vector3::new(1.0, x, x * x);
        ata += row * row.transpose();
        atb += row * v;
    }
    let coef = ata.lu().solve(&atb)?;
    Some(2.0 * coef[2] / (scale * scale))
}

/// First local maximum met when walking outward, or the grid-edge value.
fn first_maximum<'a>(mut outward: impl Iterator<Item = &'a f64>) -> f64 {
    let Some(&first) = outward.next() else {
        return f64::MAX;
    };
    let mut best = first;
    for &v in outward {
        if v < best {
            break;
        }
        best = v;
    }
    best
}

pub fn well_analysis(
    potential: &AxialPotential,
    species: &IonSpecies,
    window: (f64, f64),
    options: WellOptions,
) -> Result<WellCharacterization> {
    let (lo, hi) = window;
    if !(lo < hi) || !potential.contains(lo) || !potential.contains(hi) {
        return Err(Error::invalid(format!(
            "search window [{lo}, {hi}] must be ordered and inside the grid"
        )));
    }
    let z_min = find_local_minimum(potential, lo, hi)?;
    let h = options.fit_half_width;

    let grid = potential.grid();
    let vals = potential.samples();
    let mut points: Vec<(f64, f64)> = grid
        .iter()
        .zip(vals)
        .filter(|(z, _)| (**z - z_min).abs() <= h)
        .map(|(z, v)| (*z, *v))
        .collect();
    if points.len() < 5 {
        points = (0..=40)
            .map(|k| z_min - h + 2.0 * h * k as f64 / 40.0)
            .filter(|z| potential.contains(*z))
            .map(|z| (z, potential.value(z)))
            .collect();
    }
    let curvature = quadratic_curvature(&points, z_min, h).ok_or(Error::NoWell { lo, hi })?;
    if !(curvature > 0.0) {
        return Err(Error::NoWell { lo, hi });
    }
    let omega_z = (species.q_over_m() * curvature).sqrt();

    let phi_min = potential.value(z_min);
    let split = grid.partition_point(|&z| z <= z_min);
    let barrier = first_maximum(vals[..split].iter().rev())
        .min(first_maximum(vals[split..].iter()));
    let axial_depth = species.volts_to_ev((barrier - phi_min).max(0.0));

    Ok(WellCharacterization {
        z_min,
        omega_z,
        axial_depth,
        curvature,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Vec<f64> {
        (0..=2000).map(|k| -5e-3 + k as f64 * 5e-6).collect()
    }

    #[test]
    fn exact_quadratic() {
        let ca = IonSpecies::calcium40();
        let c = 3.27e5;
        let z0 = 0.123e-3;
        let p = AxialPotential::from_fn(&grid(), |z| c * (z - z0) * (z - z0)).unwrap();
        let w = well_analysis(&p, &ca, (-1e-3, 1e-3), WellOptions::default()).unwrap();
        let expected = (2.0 * c * ca.q_over_m()).sqrt();
        assert!((w.omega_z / expected - 1.0).abs() < 1e-6);
        assert!((w.z_min - z0).abs() < 1e-10);
        // barrier is at the nearer grid edge
        let depth = c * (5e-3 - z0).powi(2);
        assert!((w.axial_depth / depth - 1.0).abs() < 1e-9);
    }

    #[test]
    fn no_well_for_flat_or_hump() {
        let ca = IonSpecies::calcium40();
        let flat = AxialPotential::from_fn(&grid(), |_| 0.0).unwrap();
        assert!(matches!(
            well_analysis(&flat, &ca, (-1e-3, 1e-3), WellOptions::default()),
            Err(Error::NoWell { .. })
        ));
        let hump = AxialPotential::from_fn(&grid(), |z| -z * z).unwrap();
        assert!(well_analysis(&hump, &ca, (-1e-3, 1e-3), WellOptions::default()).is_err());
    }

    #[test]
    fn window_outside_grid() {
        let ca = IonSpecies::calcium40();
        let p = AxialPotential::from_fn(&grid(), |z| z * z).unwrap();
        assert!(matches!(
            well_analysis(&p, &ca, (-9e-3, 1e-3), WellOptions::default()),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn double_well_depth_is_inner_barrier() {
        let ca = IonSpecies::calcium40();
        // minima at +-1 mm, barrier 0.1 V at 0
        let p = AxialPotential::from_fn(&grid(), |z| {
            let x = z / 1e-3;
            0.1 * (x * x - 1.0).powi(2)
        })
        .unwrap();
        let w = well_analysis(
            &p,
            &ca,
            (0.5e-3, 1.5e-3),
            WellOptions { fit_half_width: 0.1e-3 },
        )
        .unwrap();
        assert!((w.z_min - 1e-3).abs() < 1e-9);
        assert!((w.axial_depth - 0.1).abs() < 1e-9);
    }

    #[test]
    fn descend_finds_minimum() {
        let p = AxialPotential::from_fn(&grid(), |z| (z - 0.7e-3).powi(2)).unwrap();
        let z = descend_to_minimum(&p, -2e-3).unwrap();
        assert!((z - 0.7e-3).abs() < 1e-10);
        let slope = AxialPotential::from_fn(&grid(), |z| z).unwrap();
        assert!(descend_to_minimum(&slope, 0.0).is_none());
    }
}
