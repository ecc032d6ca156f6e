//! Deterministic, splittable random streams.
//!
//! Every random draw in the workspace flows from a single 64-bit master seed.
//! A stream is addressed by (domain, index): the master seed keys the ChaCha
//! cipher and the (domain, index) pair selects its stream, so parallel and
//! serial consumers of the same address always see the same values.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent consumers of randomness. The discriminant is baked into the
/// stream id, so adding variants at the end keeps old streams stable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamDomain {
    PhantomGen = 1,
    Sample = 2,
    ParamInit = 3,
    Background = 4,
    EpochShuffle = 5,
    Probe = 6,
}

/// RNG for stream (domain, index) under `master_seed`.
pub fn stream_rng(master_seed: u64, domain: StreamDomain, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    debug_assert!(index < 1 << 56, "stream index exceeds 56 bits");
    rng.set_stream(((domain as u64) << 56) | (index & ((1 << 56) - 1)));
    rng
}

/// Collapses a stream address into a single u64 seed for provenance records.
pub fn stream_seed(master_seed: u64, domain: StreamDomain, index: u64) -> u64 {
    // splitmix64 finalizer over the address; stable across platforms.
    let mut x = master_seed
        .wrapping_add(((domain as u64) << 56) | index)
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}
