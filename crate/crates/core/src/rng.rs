//! Deterministic RNG construction. Every stochastic component takes an
//! explicit seed and builds its stream through these helpers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Create a deterministic `ChaCha8Rng` from a seed.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive a child seed from a parent seed and a stream of context words.
///
/// Used to give parallel work items (ensemble members, dropout sites per
/// training step) independent deterministic streams that do not depend on
/// scheduling order. SplitMix64 finalizer per word.
pub fn derive_seed(parent: u64, context: &[u64]) -> u64 {
    let mut state = parent;
    for &word in context {
        state = state.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(word);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        state = z ^ (z >> 31);
    }
    state
}
