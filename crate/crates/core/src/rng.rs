//! Seeded random streams.
//!
//! Every stochastic choice in the crate (token mapping, masking, shuffling,
//! dropout, initialization) draws from a [`SeqRng`], which is ChaCha8 as
//! implemented by `rand_chacha`. A stream is identified by a root seed plus a
//! path of 64-bit keys; [`stream`] folds the path into a 256-bit ChaCha key
//! with SplitMix64:
//!
//! ```text
//! state = splitmix64(seed)
//! for key in path: state = splitmix64(state ^ splitmix64(key))
//! chacha_key[i] = splitmix64(state + i * 0x9E3779B97F4A7C15), i = 0..4
//! ```
//!
//! Streams with different paths are independent, so per-user masking can be
//! computed in any order and still give the same bytes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SeqRng = ChaCha8Rng;

/// Purpose tags used as the first key of a stream path.
pub mod domain {
    pub const TOKEN_MAP: u64 = 1;
    pub const MASKING: u64 = 2;
    pub const SHUFFLE: u64 = 3;
    pub const DROPOUT: u64 = 4;
    pub const INIT: u64 = 5;
    pub const SYNTHETIC: u64 = 6;
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Opens the stream named by `seed` and `path`.
pub fn stream(seed: u64, path: &[u64]) -> SeqRng {
    let mut state = splitmix64(seed);
    for &key in path {
        state = splitmix64(state ^ splitmix64(key));
    }
    let mut key = [0u8; 32];
    for (i, chunk) in key.chunks_exact_mut(8).enumerate() {
        let word = splitmix64(state.wrapping_add((i as u64).wrapping_mul(GOLDEN)));
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
