//! Random number plumbing.
//!
//! Simulations take `&mut impl Randomness`. Any [`rand::RngCore`] qualifies;
//! tests substitute scripted sources to force particular service times or
//! tie-breaks.
//!
//! Reproducible streams come from [`StreamRng`], a ChaCha8 generator. ChaCha is
//! counter based, so a `(seed, stream)` pair names an independent sequence no
//! matter which thread consumes it.

use rand::{Rng, RngCore, SeedableRng};
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};

/// The named generator used for every seeded run.
pub type StreamRng = rand_chacha::ChaCha8Rng;

/// Source of the handful of variates the simulators need.
pub trait Randomness {
    /// Uniform on `[0, 1)`.
    fn uniform(&mut self) -> f64;

    /// Exponential with the given rate. `rate` must be positive.
    fn exponential(&mut self, rate: f64) -> f64;

    fn standard_normal(&mut self) -> f64;

    /// Gamma with the given shape and scale (both positive).
    fn gamma(&mut self, shape: f64, scale: f64) -> f64;
}

impl<R: RngCore + ?Sized> Randomness for R {
    fn uniform(&mut self) -> f64 {
        self.random::<f64>()
    }

    fn exponential(&mut self, rate: f64) -> f64 {
        let e: f64 = Exp1.sample(self);
        e / rate
    }

    fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(self)
    }

    fn gamma(&mut self, shape: f64, scale: f64) -> f64 {
        match Gamma::new(shape, scale) {
            Ok(g) => g.sample(self),
            Err(_) => f64::NAN,
        }
    }
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for replication `index` of the experiment family `family` under `root`.
///
/// `seed = mix64(mix64(root ^ mix64(family)) ^ index)`.
pub fn replication_seed(root: u64, family: u64, index: u64) -> u64 {
    mix64(mix64(root ^ mix64(family)) ^ index)
}

/// A ChaCha8 stream keyed by `seed` on stream 0.
pub fn stream_rng(seed: u64) -> StreamRng {
    StreamRng::seed_from_u64(seed)
}
