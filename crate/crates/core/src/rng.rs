//! Seeded, splittable random streams.
//!
//! Every seeded operation draws from ChaCha8 keyed by the caller's seed. Work
//! that fans out (trials, error events, repeated calls) takes its own stream
//! number on the same key, so results never depend on scheduling order.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use num_complex::Complex64;

pub type StreamRng = ChaCha8Rng;

/// Stream `index` of the generator keyed by `seed`.
pub fn substream(seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Seed for child task `index`: the first word of stream `index + 1`.
///
/// Stream 0 stays reserved for the parent's own draws.
pub fn child_seed(seed: u64, index: u64) -> u64 {
    substream(seed, index + 1).next_u64()
}

/// Uniform integer in `[0, n)`.
#[inline]
pub fn uniform_below<R: RngCore + ?Sized>(rng: &mut R, n: usize) -> usize {
    rng.random_range(0..n)
}

/// Uniform real in `[0, 1)`.
#[inline]
pub fn unit<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>()
}

/// Standard complex Gaussian with `E|z|² = 1`.
pub fn complex_normal<R: RngCore + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * core::f64::consts::FRAC_1_SQRT_2
}

/// Index drawn from a cumulative distribution by inverse CDF.
pub fn sample_cdf<R: RngCore + ?Sized>(rng: &mut R, cdf: &[f64]) -> usize {
    let total = *cdf.last().expect("empty distribution");
    let u = unit(rng) * total;
    let k = cdf.partition_point(|&c| c <= u);
    if k < cdf.len() {
        return k;
    }
    // u rounded up to the total: fall back to the last bucket with mass.
    cdf.partition_point(|&c| c < total)
}

/// Running sums of `probs`.
pub fn cumulative(probs: &[f64]) -> alloc::vec::Vec<f64> {
    let mut acc = 0.0;
    probs
        .iter()
        .map(|&p| {
            acc += p.max(0.0);
            acc
        })
        .collect()
}
