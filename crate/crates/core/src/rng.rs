//! Seeded, splittable random streams.
//!
//! Every consumer draws from a ChaCha8 keystream selected by
//! `(seed, stream)`, so e.g. each simulated case gets its own generator and
//! results never depend on the order in which cases are processed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream reserved for population-level draws (names, cohorts, report plans).
pub const POPULATION_STREAM: u64 = u64::MAX;

pub fn stream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
