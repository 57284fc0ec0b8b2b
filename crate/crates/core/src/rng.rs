//! Counter-based uniform variates.
//!
//! Every uniform is a pure function of `(seed, stream, index, lane)`, so any
//! digit of a generated stream can be recomputed in isolation and replicas are
//! independent of evaluation order or worker count.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Number of independent uniforms available per index.
pub const LANES: u64 = 4;

/// Identifies one reproducible random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StreamSeed {
    pub seed: u64,
    pub stream: u64,
}

impl StreamSeed {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }
}

#[derive(Debug, Clone)]
pub struct CounterRng {
    key: [u8; 32],
    stream: u64,
}

impl CounterRng {
    pub fn new(seed: StreamSeed) -> Self {
        let mut key = [0u8; 32];
        ChaCha8Rng::seed_from_u64(seed.seed).fill_bytes(&mut key);
        Self {
            key,
            stream: seed.stream,
        }
    }

    /// Raw 64 random bits at `(index, lane)`.
    pub fn bits(&self, index: u64, lane: u64) -> u64 {
        debug_assert!(lane < LANES);
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(self.stream);
        // word_pos counts 32-bit words; each lane consumes two.
        let word = (index as u128) * (2 * LANES as u128) + 2 * lane as u128;
        rng.set_word_pos(word);
        rng.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 bits of resolution.
    pub fn uniform(&self, index: u64, lane: u64) -> f64 {
        (self.bits(index, lane) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}
