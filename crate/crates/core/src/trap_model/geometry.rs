use crate::{Error, Result};

/// Labels of the two radial compensation electrodes, which run parallel to
/// the trap axis and play no role in the axial model.
pub const COMPENSATION_ELECTRODES: [&str; 2] = ["C1", "C2"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Zone {
    Loading,
    Taper,
    Experimental,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    /// 1-based electrode number.
    pub index: usize,
    /// Axial centre in m.
    pub center: f64,
    /// Axial width in m.
    pub width: f64,
    pub zone: Zone,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrapGeometry {
    pub segments: Vec<Segment>,
    pub blade_separation_experimental: f64,
    pub blade_separation_loading: f64,
}

/// Width of the etched insulation groove between adjacent segments.
pub const GROOVE_WIDTH: f64 = 120e-6;
pub const EXPERIMENTAL_SEGMENT_WIDTH: f64 = 0.5e-3;
pub const WIDE_SEGMENT_WIDTH: f64 = 2.0e-3;

impl TrapGeometry {
    pub fn new(
        segments: Vec<Segment>,
        blade_separation_experimental: f64,
        blade_separation_loading: f64,
    ) -> Result<Self> {
        let g = Self {
            segments,
            blade_separation_experimental,
            blade_separation_loading,
        };
        g.validate()?;
        Ok(g)
    }

    /// Fifteen segment pairs: 1-3 loading zone and 4-5 taper (2 mm wide),
    /// 6-15 experimental zone (0.5 mm wide), 120 um grooves in between.
    /// The axial origin is the centre of segment 10, where the ion starts.
    pub fn standard() -> Self {
        let zone_of = |i: usize| match i {
            1..=3 => Zone::Loading,
            4..=5 => Zone::Taper,
            _ => Zone::Experimental,
        };
        let width_of = |i: usize| match zone_of(i) {
            Zone::Experimental => EXPERIMENTAL_SEGMENT_WIDTH,
            _ => WIDE_SEGMENT_WIDTH,
        };
        let mut segments = Vec::with_capacity(15);
        let mut left_edge = 0.0;
        for i in 1..=15 {
            let w = width_of(i);
            segments.push(Segment {
                index: i,
                center: left_edge + w / 2.0,
                width: w,
                zone: zone_of(i),
            });
            left_edge += w + GROOVE_WIDTH;
        }
        let origin = segments[9].center;
        for s in &mut segments {
            s.center -= origin;
        }
        Self {
            segments,
            blade_separation_experimental: 2.0e-3,
            blade_separation_loading: 4.0e-3,
        }
    }

    /// `n` identical segments of width `width` on pitch `pitch`, centred on 0.
    pub fn uniform(n: usize, width: f64, pitch: f64) -> Result<Self> {
        let mid = (n as f64 - 1.0) / 2.0;
        let segments = (0..n)
            .map(|i| Segment {
                index: i + 1,
                center: (i as f64 - mid) * pitch,
                width,
                zone: Zone::Experimental,
            })
            .collect();
        Self::new(segments, 2.0e-3, 2.0e-3)
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::invalid("geometry has no segments"));
        }
        for s in &self.segments {
            if !(s.width > 0.0) {
                return Err(Error::invalid(format!(
                    "segment {} has non-positive width",
                    s.index
                )));
            }
        }
        if self
            .segments
            .windows(2)
            .any(|w| w[1].center <= w[0].center)
        {
            return Err(Error::invalid("segment centres must be strictly increasing"));
        }
        if !(self.blade_separation_experimental > 0.0 && self.blade_separation_loading > 0.0) {
            return Err(Error::invalid("blade separations must be positive"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Ion-electrode distance r0 in the experimental zone.
    pub fn r0(&self) -> f64 {
        self.blade_separation_experimental / 2.0
    }

    pub fn segment(&self, index: usize) -> Option<&Segment> {
        self.segments.iter().find(|s| s.index == index)
    }
}

impl Default for TrapGeometry {
    fn default() -> Self {
        Self::standard()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_layout() {
        let g = TrapGeometry::standard();
        g.validate().unwrap();
        assert_eq!(g.len(), 15);
        assert_eq!(g.segment(10).unwrap().center, 0.0);
        assert_eq!(g.segment(1).unwrap().width, 2.0e-3);
        assert_eq!(g.segment(12).unwrap().width, 0.5e-3);
        // segment 13 sits three pitches (1.86 mm) from segment 10
        let c13 = g.segment(13).unwrap().center;
        assert!((c13 - 3.0 * 0.62e-3).abs() < 1e-12);
        assert!((g.r0() - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn rejects_overlapping_centres() {
        let mut g = TrapGeometry::standard();
        g.segments[3].center = g.segments[2].center;
        assert!(g.validate().is_err());
    }
}
