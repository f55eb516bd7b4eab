//! Seeded pseudo-random number generation.
//!
//! Everything in this crate that needs randomness draws from
//! xoshiro256\*\* — a 64-bit xorshift-family generator — seeded through
//! SplitMix64 (`SeedableRng::seed_from_u64`). Both are pure integer
//! arithmetic, so streams are identical across platforms, which the
//! byte-identical output guarantees of the pipeline rely on.

pub use rand_xoshiro::{SplitMix64, Xoshiro256StarStar};

/// Derives a child seed from a base seed and a stream index, so independent
/// components (trees of a forest, channels of a generator) get decoupled
/// streams.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    use rand::RngCore;
    use rand::SeedableRng;
    let mut sm = SplitMix64::seed_from_u64(base ^ stream.wrapping_mul(0x9e3779b97f4a7c15));
    sm.next_u64()
}
