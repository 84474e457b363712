//! Seed-derived random streams.
//!
//! Every stochastic component draws from a ChaCha stream derived from a base
//! seed and a list of tags (iteration number, coordinate index, sub-call
//! slot). Streams are therefore reproducible regardless of scheduling.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Mix a base seed with a tag path into a single 64-bit stream id.
pub fn mix(seed: u64, tags: &[u64]) -> u64 {
    let mut state = seed ^ 0xa076_1d64_78bd_642f;
    let mut acc = splitmix64(&mut state);
    for &t in tags {
        state ^= t;
        acc ^= splitmix64(&mut state);
    }
    acc
}

/// Derive an independent ChaCha stream from `(seed, tags...)`.
pub fn stream(seed: u64, tags: &[u64]) -> ChaCha12Rng {
    let mut state = mix(seed, tags);
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha12Rng::from_seed(key)
}
