//! Seeded random streams.
//!
//! Every random draw goes through ChaCha8 (rand_chacha 0.9), a counter-based
//! generator whose output is fixed by the crate version. A run seed is expanded
//! into independent streams, one per purpose, so that resizing one matrix never
//! reshuffles another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    /// Dense input weights (ESN, ELM and TCRC-ELM share this stream).
    InputWeights = 1,
    /// Sparse recurrent weights: mask and values.
    RecurrentWeights = 2,
    /// Additive training-state noise.
    StateNoise = 3,
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
