//! Seed derivation for reproducible, order-independent random streams.
//!
//! A master seed is split into per-replication seeds with a SplitMix64
//! finalizer. Each replication seed keys a ChaCha8 generator whose 64-bit
//! stream id selects a coordinate block, so any block can be regenerated
//! without touching the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Coordinates per noise block. Blocks are independent ChaCha streams.
pub const BLOCK_LEN: usize = 1024;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the `index`-th child of `master`.
pub fn child_seed(master: u64, index: u64) -> u64 {
    mix64(master.wrapping_add(GOLDEN_GAMMA.wrapping_mul(index.wrapping_add(1))))
}

/// Generator for coordinate block `block` under `seed`.
pub fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}
