//! Stateless keyed random number generation.
//!
//! Every random draw in this crate is a pure function of a seed plus a few
//! integer tags (slot, pixel index, iteration, draw index). Because there is
//! no sequential generator state, a parallel run consumes exactly the same
//! values as a serial one, so results are bit-identical regardless of worker
//! count or scheduling order.

/// SplitMix64 finalizer. Full-period 64-bit mixing with good avalanche.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A keyed generator: `unit(&[tags...])` is a deterministic function of
/// `(seed, tags)` and nothing else.
#[derive(Debug, Clone, Copy)]
pub struct KeyedRng {
    seed: u64,
}

impl KeyedRng {
    pub fn new(seed: u64) -> Self {
        KeyedRng { seed }
    }

    fn absorb(&self, tags: &[u64]) -> u64 {
        let mut state = mix64(self.seed);
        for (i, &t) in tags.iter().enumerate() {
            // Distinct multiplier per position keeps (a, b) and (b, a) apart.
            state = mix64(state ^ t.wrapping_mul(0xD1B5_4A32_D192_ED03 ^ (i as u64) << 1 | 1));
        }
        state
    }

    /// Uniform in [0, 1), 53-bit resolution.
    pub fn unit(&self, tags: &[u64]) -> f64 {
        let bits = self.absorb(tags);
        (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [-1, 1).
    pub fn symmetric(&self, tags: &[u64]) -> f64 {
        2.0 * self.unit(tags) - 1.0
    }

    /// Uniform integer in [0, n). `n` must be positive.
    pub fn index(&self, tags: &[u64], n: usize) -> usize {
        debug_assert!(n > 0);
        let v = (self.unit(tags) * n as f64) as usize;
        v.min(n - 1)
    }
}
