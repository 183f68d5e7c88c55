//! Counter-based random streams.
//!
//! Every random draw in a simulation is taken from a ChaCha8 stream addressed
//! by `(seed, domain, index, step)`. The key is derived from `(seed, domain)`,
//! the ChaCha stream id is the particle index and the block counter is offset
//! by the step index. Two runs with the same seed therefore see the same
//! numbers for a given particle and step no matter how the work is scheduled
//! across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Words of keystream reserved for a single `(index, step)` cell.
const WORDS_PER_STEP_SHIFT: u32 = 32;

/// Purpose tags separating independent uses of one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    InitialLaw,
    Increments,
    Reference,
    Experiment,
    Custom(u64),
}

impl Domain {
    fn tag(self) -> u64 {
        match self {
            Domain::InitialLaw => 0x1a17,
            Domain::Increments => 0x2b28,
            Domain::Reference => 0x3c39,
            Domain::Experiment => 0x4d4a,
            Domain::Custom(v) => 0x5e5b ^ v.rotate_left(17),
        }
    }
}

/// SplitMix64 finalizer, used to derive stream keys and child seeds.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Combines a seed with further words into a new, well-mixed seed.
pub fn derive_seed(seed: u64, words: &[u64]) -> u64 {
    words
        .iter()
        .fold(mix64(seed), |acc, &w| mix64(acc ^ mix64(w)))
}

/// Factory for substreams of one `(seed, domain)` pair.
#[derive(Debug, Clone)]
pub struct StreamFactory {
    key: [u8; 32],
}

impl StreamFactory {
    pub fn new(seed: u64, domain: Domain) -> Self {
        let mut key = [0u8; 32];
        let mut state = derive_seed(seed, &[domain.tag()]);
        for chunk in key.chunks_exact_mut(8) {
            state = mix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        Self { key }
    }

    /// Stream for particle `index` at time step `step`.
    pub fn stream(&self, index: u64, step: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(index);
        rng.set_word_pos(u128::from(step) << WORDS_PER_STEP_SHIFT);
        rng
    }
}

/// Shorthand for a single substream.
pub fn substream(seed: u64, domain: Domain, index: u64, step: u64) -> ChaCha8Rng {
    StreamFactory::new(seed, domain).stream(index, step)
}
