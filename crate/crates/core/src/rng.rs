//! Seeded random streams.
//!
//! One root seed is split into independent ChaCha streams, one per
//! subsystem, so enabling or disabling one consumer never shifts the draws
//! seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    Scenario = 1,
    Render = 2,
    Detector = 3,
    Outcome = 4,
    Planner = 5,
    Wind = 6,
}

/// Deterministic generator for `stream` under root `seed`.
pub fn stream(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
