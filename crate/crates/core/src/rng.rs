//! Deterministic random-number plumbing.
//!
//! Every stochastic stage of the pipeline draws from its own named substream
//! of one master seed. Substream seeds are derived with a splitmix64 chain
//! over `(master_seed, label, index)`, so adding draws to one stage never
//! shifts the values seen by another, and a run is reproducible from the
//! single seed recorded in its manifest.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// splitmix64 mixing step; the standard finalizer from Vigna's generator.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the substream seed for `(master, label, index)`.
///
/// Labels are short static strings ("camera", "augment", "clip", ...); the
/// index distinguishes repeated uses under one label. The derivation folds
/// each label byte through splitmix64 so distinct labels decorrelate even
/// when they share a prefix.
pub fn derive_seed(master: u64, label: &str, index: u64) -> u64 {
    let mut state = splitmix64(master ^ 0x6A09_E667_F3BC_C908);
    for &byte in label.as_bytes() {
        state = splitmix64(state ^ u64::from(byte));
    }
    splitmix64(state ^ index)
}

/// Returns the ChaCha generator for a named substream of `master`.
pub fn substream(master: u64, label: &str, index: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(derive_seed(master, label, index))
}
