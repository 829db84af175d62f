//! Seeded, splittable random streams.
//!
//! Every stochastic routine takes `&mut impl Rng`. Independent work items
//! (one radio sample, one evaluation draw set) get their own stream
//! derived from `(seed, index)`, so generation order never changes the
//! result.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type RadioRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> RadioRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream `index` of `seed`. Streams of one seed never overlap.
pub fn stream(seed: u64, index: u64) -> RadioRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Stable stream indices for the distinct consumers of one run seed.
pub mod purpose {
    pub const PRIOR: u64 = 1 << 40;
    pub const INIT: u64 = 2 << 40;
    pub const TRAIN: u64 = 3 << 40;
    pub const ESTIMATE: u64 = 4 << 40;
    pub const EVAL: u64 = 5 << 40;
    pub const HOLDOUT: u64 = 6 << 40;
}

pub fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Circular complex Gaussian with `E|z|^2 = power`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, power: f64) -> Complex64 {
    let sd = (power / 2.0).sqrt();
    Complex64::new(sd * normal(rng), sd * normal(rng))
}
