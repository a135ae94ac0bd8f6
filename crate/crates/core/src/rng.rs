//! Seeding. Each path owns a ChaCha8 stream keyed by a 64-bit seed; paths of
//! an ensemble use `derive_seed(seed, index)`. Normal variates come from the
//! ziggurat sampler of `rand_distr::StandardNormal`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// One round of the SplitMix64 output function applied to `state + gamma`.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of path `index` in an ensemble: `splitmix64(seed ^ splitmix64(index))`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index))
}

#[derive(Debug, Clone)]
pub struct PathRng {
    inner: ChaCha8Rng,
}

impl PathRng {
    pub fn new(seed: u64) -> Self {
        Self { inner: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    pub fn fill_normal(&mut self, out: &mut [f64], scale: f64) {
        for x in out {
            *x = scale * self.normal();
        }
    }

    pub fn uniform(&mut self) -> f64 {
        use rand::Rng;
        self.inner.random::<f64>()
    }
}
