//! Seeded random streams.
//!
//! Every Monte Carlo unit (a trial, a sampled kernel, a sampled path) gets its
//! own ChaCha stream selected by `(seed, index)`, so results never depend on
//! how units are scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use rand_chacha::ChaCha8Rng as StreamRng;

/// The stream for unit `index` under `seed`.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Uniform draw in [0, 1).
pub fn uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.gen::<f64>()
}

/// Index drawn from an unnormalized weight vector.
pub fn categorical<R: Rng + ?Sized>(rng: &mut R, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = uniform(rng) * total;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    // rounding can push u past the last bucket
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn streams_differ_and_repeat() {
        let a: u64 = stream(7, 0).next_u64();
        let b: u64 = stream(7, 1).next_u64();
        assert_ne!(a, b);
        assert_eq!(a, stream(7, 0).next_u64());
    }

    #[test]
    fn categorical_skips_zero_weights() {
        let mut rng = stream(1, 2);
        for _ in 0..1000 {
            let i = categorical(&mut rng, &[0.0, 1.0, 0.0, 3.0]);
            assert!(i == 1 || i == 3);
        }
    }
}
