//! Seeded random streams.
//!
//! Every stochastic component draws from [`ChaCha8Rng`], a counter-based
//! generator keyed by a 64-bit seed. Independent streams for repetitions are
//! obtained by keeping the key and selecting a different stream id, so the
//! draws of repetition `r` never depend on how many other repetitions exist.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Stream `stream` of the generator keyed by `seed`.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[inline]
pub fn standard_normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn normal_vec(rng: &mut Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| standard_normal(rng)).collect()
}
