//! Reproducible random-number streams.
//!
//! Monte-Carlo work is parallelized trial-by-trial; every trial draws from
//! its own counter-derived ChaCha stream so results are independent of
//! scheduling order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The stream for a given (master seed, trial index) pair.
pub fn trial_rng(master_seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial);
    rng
}
