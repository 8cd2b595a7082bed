//! Trap geometry, axial basis potentials and well characterisation.

mod basis;
mod crystal;
mod geometry;
mod potential;
mod radial;
mod species;
mod well;

pub use basis::{analytic_basis, default_grid, load_basis, save_basis, AxialBasis, Provenance};
pub use crystal::{crystal_length_scale, ion_crystal_positions, MAX_LINEAR_IONS};
pub use geometry::{Segment, TrapGeometry, Zone, COMPENSATION_ELECTRODES};
pub use potential::{superpose, AxialPotential};
pub use radial::{calibrate_kappa, mathieu_q, RadialCharacterization, RadialParams};
pub use species::IonSpecies;
pub use well::{descend_to_minimum, find_local_minimum, well_analysis, WellCharacterization, WellOptions};
