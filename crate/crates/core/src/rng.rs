//! Seeded, portable random streams.
//!
//! Every stochastic operation derives its generator from an explicit seed,
//! optionally split into independent streams (e.g. one per cluster) so that
//! parallel execution stays deterministic.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
