//! Seeded random numbers for reproducible experiments.
//!
//! All randomness flows through [`ExperimentRng`], a ChaCha stream cipher with
//! 8 rounds (`rand_chacha::ChaCha8Rng`) seeded from a single `u64` via
//! `SeedableRng::seed_from_u64`. Uniform doubles are drawn as
//! `(next_u64 >> 11) * 2^-53`, the standard 53-bit mantissa construction,
//! giving values in `[0, 1)`.
//!
//! Complex Gaussians use the Box-Muller transform: with `u1` in `(0, 1]` and
//! `u2` in `[0, 1)`,
//!
//! ```text
//! r = sqrt(-variance * ln(u1)),  z = r * (cos(2 pi u2) + j sin(2 pi u2))
//! ```
//!
//! so `E|z|^2 = variance` and the real and imaginary parts are independent
//! `N(0, variance / 2)`. Exactly two uniforms are consumed per complex sample.

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

pub type ExperimentRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> ExperimentRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform double in `[0, 1)`.
pub fn uniform(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Circularly-symmetric complex Gaussian with `E|z|^2 = variance`.
pub fn complex_gaussian(rng: &mut impl RngCore, variance: f64) -> Complex64 {
    let u1 = 1.0 - uniform(rng);
    let u2 = uniform(rng);
    let r = (-variance * u1.ln()).sqrt();
    Complex64::from_polar(r, 2.0 * PI * u2)
}

/// Independent sub-seed for stream `index` of a master seed (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
