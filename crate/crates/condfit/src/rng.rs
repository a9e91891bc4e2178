//! Deterministic RNG streams.
//!
//! All Monte Carlo work derives per-task generators from a single `u64`
//! seed, a stream label, and a counter (replicate/shard index). Workers can
//! then run in any order, on any number of threads, without changing the
//! output: replicate `i` always sees the same generator.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream labels keep generators for unrelated purposes decorrelated even
/// when they share a seed and counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Bootstrap,
    NullCdf,
    Conditional,
    Dataset,
    Oracle,
    Generic(u64),
}

impl Stream {
    fn label(self) -> u64 {
        match self {
            Stream::Bootstrap => 0x01,
            Stream::NullCdf => 0x02,
            Stream::Conditional => 0x03,
            Stream::Dataset => 0x04,
            Stream::Oracle => 0x05,
            Stream::Generic(v) => 0x1000 + v,
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a sub-seed for a nested deterministic schedule (e.g. one seed
/// per simulated dataset, which then keys its own replicate streams).
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut state = seed ^ salt.rotate_left(31);
    splitmix64(&mut state)
}

/// Counter-based stream: a ChaCha8 generator keyed by (seed, stream, index).
pub fn stream_rng(seed: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    let mut state =
        seed ^ stream.label().rotate_left(17) ^ index.wrapping_mul(0xa076_1d64_78bd_642f);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
