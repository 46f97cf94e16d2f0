//! Seed plumbing. Everything random in this crate draws from ChaCha12 streams
//! derived from a single master seed, so results are reproducible bit for bit,
//! including under data-parallel sampling: each work chunk gets its own stream
//! index and the outputs are merged in chunk order, which makes the result
//! independent of how many worker threads rayon happens to use.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

/// Seed used when the caller does not provide one.
pub const DEFAULT_SEED: u64 = 42424242;

/// Independent generator for (seed, stream). Distinct stream indices give
/// statistically independent sequences under the same master seed.
pub fn stream(seed: u64, stream_index: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream_index);
    rng
}

/// Standard normal vector of length `n`.
pub fn normal_vector(rng: &mut ChaCha12Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}
