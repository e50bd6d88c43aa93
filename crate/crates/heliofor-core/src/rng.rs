//! Seeded random number construction.
//!
//! Everything stochastic in this crate (weight init, batch shuffling, cloud
//! noise, search draws, tree thresholds) draws from ChaCha8 streams built
//! here. ChaCha is counter-based and platform-independent, so a run is
//! reproducible bit for bit from its seed alone. Independent consumers get
//! independent streams of the same seed rather than sharing one generator,
//! which keeps results stable when one consumer changes how much randomness
//! it uses.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator for a bare seed (stream 0).
pub fn from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent substream `stream` of `seed`.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives a child seed from a parent seed and a salt. Distinct salts give
/// decorrelated children; salt 0 never returns the parent unchanged.
pub fn mix(seed: u64, salt: u64) -> u64 {
    seed ^ (salt.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// One draw from N(mean, sd²) by Box-Muller. Self-contained so normal
/// sampling shares the crate's bit-deterministic float path.
pub fn normal(rng: &mut ChaCha8Rng, mean: f64, sd: f64) -> f64 {
    use rand::RngExt;
    // Open interval keeps ln away from 0.
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    let z = crate::float::sqrt(-2.0 * crate::float::ln(u1))
        * crate::float::cos(2.0 * core::f64::consts::PI * u2);
    mean + sd * z
}
