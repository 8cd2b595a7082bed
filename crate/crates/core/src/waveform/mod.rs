//! Transport ramps and electrode voltage waveforms.

mod generate;
mod ramp;
mod signal;
mod solver;

pub use generate::generate_waveform;
pub use ramp::{ramp_position, ramp_velocity, RampSpec};
pub use signal::{lowpass, morph, quantize, DacSpec, VoltageWaveform};
pub use solver::{solve_voltages, LeastSquaresProblem, SolveTarget, SolverConfig, VoltageSolution};
