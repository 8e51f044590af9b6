//! Deterministic random streams and summation helpers.
//!
//! Monte Carlo estimators draw every sample from its own counter-derived
//! stream, so the result of a run depends only on `(seed, sample index)` and
//! never on how samples are distributed over threads.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent stream for sample `index` of the run identified by `seed`.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let key = splitmix64(splitmix64(seed) ^ splitmix64(index.wrapping_add(0x51ed_270b)));
    ChaCha8Rng::seed_from_u64(key)
}

/// Kahan compensated accumulator; sequential use keeps sums bit-stable.
#[derive(Clone, Copy, Debug, Default)]
pub struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Compensated sum of a slice in index order.
pub fn kahan_sum(xs: &[f64]) -> f64 {
    let mut acc = Kahan::new();
    for &x in xs {
        acc.add(x);
    }
    acc.value()
}
