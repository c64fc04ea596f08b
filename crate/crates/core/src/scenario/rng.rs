//! Seeded random stream shared by every generator in the crate.
//!
//! The generator is ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! `SeedableRng::seed_from_u64(seed)`. Derived draws are fixed here so other
//! implementations can reproduce streams:
//!
//! * `uniform()`: `(next_u64 >> 11) * 2^-53`, in `[0, 1)`.
//! * `below(k)`: `(next_u64 * k) >> 64` using 128-bit multiplication.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

#[derive(Debug, Clone)]
pub struct SeededRng(ChaCha8Rng);

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`; returns `lo` when the range is empty.
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + self.uniform() * (hi - lo)
    }

    /// Uniform integer in `[0, k)`. `k` must be positive.
    pub fn below(&mut self, k: u64) -> u64 {
        assert!(k > 0, "empty range");
        ((u128::from(self.next_u64()) * u128::from(k)) >> 64) as u64
    }

    pub fn pick<'a, T>(&mut self, items: &'a [T]) -> &'a T {
        &items[self.below(items.len() as u64) as usize]
    }

    /// Index drawn with probability proportional to `weights`.
    pub fn weighted(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        let mut x = self.uniform() * total;
        for (k, &w) in weights.iter().enumerate() {
            if x < w {
                return k;
            }
            x -= w;
        }
        // Rounding can leave x marginally above the last cumulative bound.
        weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
    }

    /// Independent stream for the `k`-th sub-task of this seed.
    pub fn fork(seed: u64, k: u64) -> Self {
        Self::new(seed ^ k.wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }
}
