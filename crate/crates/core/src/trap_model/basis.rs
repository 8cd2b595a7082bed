use std::f64::consts::PI;
use std::path::Path;

use super::geometry::TrapGeometry;
use crate::spline::{check_grid, CubicSpline};
use crate::table::{self, fmt_exact};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Analytic,
    Imported,
}

/// Per-electrode axial potentials: potential on the axis per volt applied to
/// one electrode pair, all others grounded. Stored as splines on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AxialBasis {
    splines: Vec<CubicSpline>,
    provenance: Provenance,
}

impl AxialBasis {
    /// Builds a basis from tabulated rows `phi[electrode][grid point]`.
    pub fn new(grid: Vec<f64>, phi: Vec<Vec<f64>>, provenance: Provenance) -> Result<Self> {
        check_grid(&grid)?;
        if phi.is_empty() {
            return Err(Error::invalid("basis needs at least one electrode"));
        }
        let splines = phi
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                if row.len() != grid.len() {
                    return Err(Error::invalid(format!(
                        "electrode {} has {} samples, grid has {}",
                        i + 1,
                        row.len(),
                        grid.len()
                    )));
                }
                CubicSpline::new(grid.clone(), row)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            splines,
            provenance,
        })
    }

    pub fn electrode_count(&self) -> usize {
        self.splines.len()
    }

    pub fn grid(&self) -> &[f64] {
        self.splines[0].knots()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Tabulated values of electrode `i` (0-based).
    pub fn phi(&self, i: usize) -> &[f64] {
        self.splines[i].values()
    }

    pub fn spline(&self, i: usize) -> &CubicSpline {
        &self.splines[i]
    }

    pub fn splines(&self) -> &[CubicSpline] {
        &self.splines
    }

    /// Interpolated value of electrode `i` at `z`.
    pub fn eval(&self, i: usize, z: f64) -> f64 {
        self.splines[i].value(z)
    }

    pub fn contains(&self, z: f64) -> bool {
        self.splines[0].contains(z)
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        load_basis(&text)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, save_basis(self))?;
        Ok(())
    }
}

/// Uniform 5 um grid reaching 4 mm beyond the outermost segment centres.
pub fn default_grid(geometry: &TrapGeometry) -> Vec<f64> {
    let margin = 4e-3;
    let step = 5e-6;
    let lo = geometry.segments[0].center - margin;
    let hi = geometry.segments[geometry.len() - 1].center + margin;
    let n = ((hi - lo) / step).ceil() as usize + 1;
    (0..n).map(|k| lo + k as f64 * step).collect()
}

/// Arctan-difference surrogate for the potential of a strip electrode of
/// width `a` at distance `rho` from the axis:
/// `(1/pi) [atan((z - c + a/2)/rho) - atan((z - c - a/2)/rho)]`.
fn strip_potential(z: f64, center: f64, width: f64, rho: f64) -> f64 {
    let u = z - center;
    (((u + width / 2.0) / rho).atan() - ((u - width / 2.0) / rho).atan()) / PI
}

pub fn analytic_basis(geometry: &TrapGeometry, gap_distance: f64, grid: &[f64]) -> Result<AxialBasis> {
    geometry.validate()?;
    if !(gap_distance > 0.0 && gap_distance.is_finite()) {
        return Err(Error::invalid(format!(
            "gap distance must be > 0, got {gap_distance}"
        )));
    }
    check_grid(grid)?;
    let (lo, hi) = (grid[0], grid[grid.len() - 1]);
    if let Some(s) = geometry
        .segments
        .iter()
        .find(|s| s.center < lo || s.center > hi)
    {
        return Err(Error::invalid(format!(
            "grid [{lo}, {hi}] does not cover centre of segment {}",
            s.index
        )));
    }
    let phi = geometry
        .segments
        .iter()
        .map(|s| {
            grid.iter()
                .map(|&z| strip_potential(z, s.center, s.width, gap_distance))
                .collect()
        })
        .collect();
    AxialBasis::new(grid.to_vec(), phi, Provenance::Analytic)
}

const BASIS_MAGIC: &str = "axial-basis v1";

/// Serialises a basis in the `# axial-basis v1 electrodes=<N>` table format.
pub fn save_basis(basis: &AxialBasis) -> String {
    let n = basis.electrode_count();
    let mut out = format!("# {BASIS_MAGIC} electrodes={n}\n");
    for (k, z) in basis.grid().iter().enumerate() {
        out.push_str(&fmt_exact(*z));
        for i in 0..n {
            out.push_str(", ");
            out.push_str(&fmt_exact(basis.phi(i)[k]));
        }
        out.push('\n');
    }
    out
}

/// Parses the basis table format. Errors carry the offending line number.
pub fn load_basis(text: &str) -> Result<AxialBasis> {
    let parsed = table::parse(text)?;
    let (hline, header) = parsed
        .header
        .first()
        .ok_or_else(|| Error::parse(1, "missing `# axial-basis v1` header"))?;
    if !header.starts_with(BASIS_MAGIC) {
        return Err(Error::parse(*hline, format!("expected `{BASIS_MAGIC}` header")));
    }
    let n: usize = table::header_value(header, "electrodes")
        .and_then(|v| v.parse().ok())
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::parse(*hline, "header lacks a valid electrodes=<N> field"))?;

    let mut grid = Vec::with_capacity(parsed.rows.len());
    let mut phi = vec![Vec::with_capacity(parsed.rows.len()); n];
    for row in &parsed.rows {
        if row.values.len() != n + 1 {
            return Err(Error::parse(
                row.line,
                format!(
                    "expected {} columns (z and {n} electrodes), found {}",
                    n + 1,
                    row.values.len()
                ),
            ));
        }
        let z = row.values[0];
        if let Some(&prev) = grid.last() {
            if z <= prev {
                return Err(Error::parse(row.line, "grid column is not strictly increasing"));
            }
        }
        grid.push(z);
        for (i, v) in row.values[1..].iter().enumerate() {
            phi[i].push(*v);
        }
    }
    if grid.len() < 3 {
        let line = parsed.rows.last().map_or(*hline, |r| r.line);
        return Err(Error::parse(line, "basis table needs at least 3 grid rows"));
    }
    AxialBasis::new(grid, phi, Provenance::Imported)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trap_model::geometry::{Segment, Zone};

    fn two_widths() -> TrapGeometry {
        TrapGeometry::new(
            vec![
                Segment { index: 1, center: -3e-3, width: 0.5e-3, zone: Zone::Experimental },
                Segment { index: 2, center: 3e-3, width: 2e-3, zone: Zone::Loading },
            ],
            2e-3,
            4e-3,
        )
        .unwrap()
    }

    #[test]
    fn peak_at_centre_and_below_one() {
        let g = TrapGeometry::standard();
        let grid = default_grid(&g);
        let b = analytic_basis(&g, 1e-3, &grid).unwrap();
        for (i, seg) in g.segments.iter().enumerate() {
            let (k, peak) = b.phi(i)
                .iter()
                .enumerate()
                .fold((0, f64::MIN), |acc, (k, &v)| if v > acc.1 { (k, v) } else { acc });
            assert!(peak < 1.0 && peak > 0.0);
            assert!((grid[k] - seg.center).abs() <= 5e-6);
            assert!(b.phi(i).iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn narrow_electrode_has_lower_peak() {
        let g = two_widths();
        let grid: Vec<f64> = (0..=2000).map(|k| -10e-3 + k as f64 * 1e-5).collect();
        let b = analytic_basis(&g, 1e-3, &grid).unwrap();
        let peak = |i| b.phi(i).iter().cloned().fold(f64::MIN, f64::max);
        assert!(peak(0) < peak(1));
    }

    #[test]
    fn vanishes_far_away() {
        let v = strip_potential(1.0, 0.0, 0.5e-3, 1e-3);
        assert!(v.abs() < 1e-6);
        let sym = strip_potential(0.3e-3, 0.0, 0.5e-3, 1e-3) - strip_potential(-0.3e-3, 0.0, 0.5e-3, 1e-3);
        assert_eq!(sym, 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = TrapGeometry::standard();
        let grid = default_grid(&g);
        assert!(analytic_basis(&g, 0.0, &grid).is_err());
        let mut rev = grid.clone();
        rev.reverse();
        assert!(analytic_basis(&g, 1e-3, &rev).is_err());
        let short: Vec<f64> = (0..100).map(|k| k as f64 * 1e-5).collect();
        assert!(analytic_basis(&g, 1e-3, &short).is_err());
    }

    #[test]
    fn table_round_trip_is_identical() {
        let g = TrapGeometry::standard();
        let grid: Vec<f64> = (0..=400).map(|k| -14e-3 + k as f64 * 5.5e-5).collect();
        let b = analytic_basis(&g, 1e-3, &grid).unwrap();
        let text = save_basis(&b);
        let back = load_basis(&text).unwrap();
        assert_eq!(back.electrode_count(), 15);
        assert_eq!(back.provenance(), Provenance::Imported);
        assert_eq!(back.grid(), b.grid());
        for i in 0..15 {
            assert_eq!(back.phi(i), b.phi(i));
        }
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad_order = "# axial-basis v1 electrodes=1\n0.0, 1\n1.0, 2\n0.5, 3\n";
        match load_basis(bad_order) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        let bad_count = "# axial-basis v1 electrodes=2\n0.0, 1, 2\n1.0, 2\n";
        match load_basis(bad_count) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let no_header = "0.0, 1\n";
        assert!(matches!(load_basis(no_header), Err(Error::Parse { .. })));
    }
}
