//! Deterministic splitting of a master seed into independent streams.
//!
//! The 32-byte ChaCha20 key of a child stream is the little-endian encoding of
//! `(seed, config_index, run, purpose)`, one `u64` each. Streams for distinct
//! tuples share no state, so adding configurations or runs never perturbs
//! existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// What a child stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamPurpose {
    /// Drawing the ground-truth distribution of a run.
    GroundTruth = 0,
    /// Everything inside the online loop.
    Loop = 1,
}

pub fn child_rng(seed: u64, config_index: u64, run: u64, purpose: StreamPurpose) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    for (chunk, word) in key.chunks_exact_mut(8).zip([seed, config_index, run, purpose as u64]) {
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha20Rng::from_seed(key)
}
