//! Deterministic seed derivation.
//!
//! Every random stream in an experiment is derived from a single master seed
//! through SplitMix64. A replica stream is `split(master, replica_index)`,
//! and each agent inside the replica draws from
//! `split(replica_seed, 1 + agent_index)` (label 0 is reserved for the
//! replica-level stream that drives warm-up ordering). Re-running with the
//! same master seed therefore reproduces every trajectory bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One round of the SplitMix64 output function.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed and a stream label.
pub fn split(seed: u64, label: u64) -> u64 {
    splitmix64(seed ^ splitmix64(label.wrapping_add(1)))
}

/// Build the deterministic generator for a derived stream.
pub fn rng_for(seed: u64, label: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(split(seed, label))
}
