//! Seeded random streams and the scalar samplers used across the crate.
//!
//! Every replication owns one `Stream` derived from `(master seed, stream
//! index)`; identical inputs reproduce identical draws on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Independent stream `index` of the generator family seeded by `seed`.
pub fn stream(seed: u64, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Uniform draw on `[0, 1)`.
#[inline]
pub fn uniform(rng: &mut Stream) -> f64 {
    rng.gen::<f64>()
}

/// Exponential draw with the given rate.
#[inline]
pub fn exponential(rng: &mut Stream, rate: f64) -> f64 {
    debug_assert!(rate > 0.0);
    let u = rng.gen::<f64>();
    -libm::log(1.0 - u) / rate
}

/// Standard normal draw (Box–Muller).
#[inline]
pub fn standard_normal(rng: &mut Stream) -> f64 {
    let u1 = loop {
        let u = rng.gen::<f64>();
        if u > 0.0 {
            break u;
        }
    };
    let u2 = rng.gen::<f64>();
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
}

/// Index draw from a finite distribution given by `probs` (assumed to sum to
/// one up to rounding; the last index absorbs the remainder).
#[inline]
pub fn categorical(rng: &mut Stream, probs: &[f64]) -> usize {
    let u = rng.gen::<f64>();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}
