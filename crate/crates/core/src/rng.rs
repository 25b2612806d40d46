//! Deterministic seeded randomness with independently addressable streams.
//!
//! Built on ChaCha8, a counter-based generator: the same `(seed, stream)`
//! pair yields the same draw sequence on every platform and run, and
//! distinct streams of one seed are independent. Parallel work items
//! (episodes, trials) each derive their own stream from a master seed, so
//! results do not depend on scheduling.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A deterministic random stream, identified by `(seed, stream)`.
#[derive(Debug, Clone)]
pub struct SimRng {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl SimRng {
    /// Stream 0 of the given seed.
    pub fn from_seed(seed: u64) -> Self {
        Self::from_seed_stream(seed, 0)
    }

    pub fn from_seed_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        SimRng {
            seed,
            stream,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Child stream `index` of this stream. Derived from the construction
    /// parameters only, so the result is independent of how many draws
    /// have been consumed from `self`.
    pub fn substream(&self, index: u64) -> SimRng {
        SimRng::from_seed_stream(self.seed, derive_seed(self.stream, index))
    }

    /// Uniform draw in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    /// Uniform integer in `0..n`; `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }

    /// Uniform draw in `[low, high)`, or `low` when the range is empty.
    pub fn range(&mut self, low: f64, high: f64) -> f64 {
        if low < high {
            self.inner.gen_range(low..high)
        } else {
            low
        }
    }
}

/// Stable seed mixing (splitmix64 step): maps `(master, index)` to a seed
/// that is decorrelated from both, for handing out per-trial seeds.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
