//! Seeded random streams.
//!
//! Every randomized stage derives its own named stream from a single root
//! seed, so stages can be re-run independently while staying reproducible.
//! ChaCha is used because its output is identical across platforms.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Derive a stage-specific random stream from a root seed and a stream label.
///
/// Identical `(seed, label)` pairs always yield identical streams; distinct
/// labels yield statistically independent streams.
pub fn stream(seed: u64, label: &str) -> ChaCha12Rng {
    let mut state = splitmix64(seed);
    for &byte in label.as_bytes() {
        state = splitmix64(state ^ u64::from(byte));
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha12Rng::from_seed(key)
}

/// Draw one sample from a normal distribution via the Box-Muller transform.
pub fn normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, std_dev: f64) -> f64 {
    // 1 - u keeps the argument of ln strictly positive.
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    mean + std_dev * (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn splitmix64(seed: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
