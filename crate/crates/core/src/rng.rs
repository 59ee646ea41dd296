//! Seeded random streams.
//!
//! Every simulation draws from [`SimRng`], a ChaCha8 stream generator. A
//! `(seed, stream)` pair fully determines the sequence on every platform,
//! so replica `i` of a sweep always sees the same numbers regardless of
//! thread scheduling. Integer draws go through `u32` ranges so that 32-bit
//! targets (wasm) reproduce native results bit for bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream 0 of `seed`.
pub fn from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `stream` of `seed`.
pub fn split(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives a child seed from `seed` for a nested sub-experiment. Uses the
/// SplitMix64 finalizer, so nearby inputs give unrelated outputs.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform index in `0..k`.
#[inline]
pub fn index<R: Rng + ?Sized>(rng: &mut R, k: usize) -> usize {
    debug_assert!(k > 0 && k <= u32::MAX as usize);
    rng.random_range(0..k as u32) as usize
}

/// Uniform draw in `(0, 1]`.
#[inline]
pub fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}
