//! The one PRNG used for every random choice in the toolkit.
//!
//! ChaCha8 seeded through `seed_from_u64` gives the same stream on every
//! platform, so outputs depend only on (input, seed).

use rand::SeedableRng;

pub type Rng = rand_chacha::ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Derives an independent stream for a sub-task (restart `i`, term `i`, ...).
pub fn derive(seed: u64, stream: u64) -> Rng {
    let mut r = Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}
