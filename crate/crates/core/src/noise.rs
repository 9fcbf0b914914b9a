//! Seeded additive white Gaussian noise.
//!
//! The normal variate at linear index `i` is a pure function of `(seed, i)`:
//! two counter-hashed uniforms (SplitMix64 finalizer over `seed` and the
//! counters `2i`, `2i + 1`) are fed through the Box-Muller transform. This
//! keeps realizations identical regardless of evaluation order or threading.

use crate::error::{param, Result};
use crate::image::Image;

/// Noise level on the `[0, 1]` intensity scale plus the realization seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return param(format!("noise sigma must be finite and nonnegative, got {sigma}"));
        }
        Ok(Self { sigma, seed })
    }

    /// Builds a spec from a sigma given on the 0-255 scale.
    pub fn from_8bit(sigma_255: f64, seed: u64) -> Result<Self> {
        Self::new(sigma_255 / 255.0, seed)
    }
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform in `(0, 1]` with 53 bits of resolution.
#[inline]
fn uniform(seed: u64, counter: u64) -> f64 {
    let key = mix64(seed.wrapping_add(GOLDEN));
    let bits = mix64(key ^ counter.wrapping_mul(GOLDEN).wrapping_add(GOLDEN));
    ((bits >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal variate for sample `index` of the realization `seed`.
#[inline]
pub fn standard_normal(seed: u64, index: u64) -> f64 {
    let u1 = uniform(seed, 2 * index);
    let u2 = uniform(seed, 2 * index + 1);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// `noisy_i = clean_i + sigma * z_i`; the output is not clipped.
pub fn add_noise_to_slice(clean: &[f64], spec: NoiseSpec) -> Vec<f64> {
    if spec.sigma == 0.0 {
        return clean.to_vec();
    }
    clean
        .iter()
        .enumerate()
        .map(|(i, &f)| f + spec.sigma * standard_normal(spec.seed, i as u64))
        .collect()
}

pub fn add_gaussian_noise(clean: &Image, spec: NoiseSpec) -> Image {
    let data = add_noise_to_slice(clean.data(), spec);
    Image::new(clean.width(), clean.height(), data).expect("dimensions preserved")
}
