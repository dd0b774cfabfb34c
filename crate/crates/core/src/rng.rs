//! Seeding discipline: every run derives one ChaCha8 generator per concern
//! from (seed, stream). Streams never overlap, so adding draws to one
//! subsystem cannot shift any other subsystem's sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub mod stream {
    /// Network parameter initialization.
    pub const INIT: u64 = 0;
    /// Rollout action sampling (warmup uniform + policy noise).
    pub const ROLLOUT: u64 = 1;
    /// Gradient updates (batch indices, target-action noise).
    pub const UPDATE: u64 = 2;
    /// Training-episode environment resets.
    pub const ENV_RESET: u64 = 3;
    /// Evaluation-episode environment resets.
    pub const EVAL: u64 = 4;
    /// Q-Error rollout resets.
    pub const QERROR: u64 = 5;
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
