//! The six-step transport measurement: morph into the transport well,
//! shuttle out and back, morph back, then observe the fluorescence while
//! Doppler cooling. Monte Carlo repetition, sweeps and success statistics.

mod sequence;
mod stats;
mod sweep;

pub use sequence::{run_sequence, PreparedSequence, SequenceOutcome, SequenceSpec, TransportMode};
pub use stats::{estimate_success, SuccessEstimate, SuccessRecord};
pub use sweep::{argmin_sigma, sweep_sigma, sweep_tau, SigmaRow, TauRow};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent random stream for trial `index` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
