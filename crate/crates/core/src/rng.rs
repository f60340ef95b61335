//! Named, reproducible random streams.
//!
//! Nothing in the crate draws from a global RNG. Every sampling site takes a
//! stream derived from a base seed plus a path of integer tags, so results do
//! not depend on call order elsewhere or on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Stream tags. Each top-level consumer owns one tag value.
pub mod tag {
    pub const ARM_PARAMS: u64 = 1;
    pub const FEATURES: u64 = 2;
    pub const NOISE_ARMS: u64 = 3;
    pub const NOISE_TABLE: u64 = 4;
    pub const Q_INIT: u64 = 5;
    pub const TRAIN: u64 = 6;
    pub const TIE_BREAK: u64 = 7;
    pub const EVAL: u64 = 8;
    pub const EPISODE: u64 = 9;
    pub const PROBES: u64 = 10;
    pub const COMMQ_INIT: u64 = 11;
    pub const COMM_POLICY: u64 = 12;
    pub const COMM_EVAL: u64 = 13;
    pub const RANDOM_SENDERS: u64 = 14;
    pub const ANALYSIS: u64 = 15;
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a seed and a tag path into a single 64-bit value.
pub fn derive(seed: u64, path: &[u64]) -> u64 {
    let mut state = seed;
    let mut out = splitmix64(&mut state);
    for &p in path {
        state ^= p.wrapping_mul(0xD6E8_FEB8_6659_FD93).rotate_left(17);
        out ^= splitmix64(&mut state);
        state = state.wrapping_add(out);
    }
    out
}

/// Independent ChaCha stream for `(seed, path)`.
pub fn stream(seed: u64, path: &[u64]) -> Stream {
    let mut key = [0u8; 32];
    let mut state = derive(seed, path);
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
