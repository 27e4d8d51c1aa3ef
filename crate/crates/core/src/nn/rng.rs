//! Seeded, platform-independent random streams.
//!
//! Each consumer (a layer's initializer, the data shuffler, a synthetic data
//! generator) takes its own stream so adding draws in one place never shifts
//! the numbers another place sees.

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use super::Tensor;

pub type StreamRng = Xoshiro256PlusPlus;

/// Stream `index` of `seed`: the seeded generator advanced by `index` jumps
/// of 2^128 steps, so streams never overlap.
pub fn stream(seed: u64, index: u32) -> StreamRng {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    for _ in 0..index {
        rng.jump();
    }
    rng
}

/// Uniform in `[-limit, limit]` with `limit = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform(rng: &mut StreamRng, shape: &[usize], fan_in: usize, fan_out: usize) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-limit..=limit)).collect();
    Tensor::from_vec(shape, data).expect("glorot shape")
}
