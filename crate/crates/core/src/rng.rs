//! Reproducible random substreams.
//!
//! Every randomized computation is keyed by `(seed, domain, index)`: `domain`
//! separates independent suites and `index` selects one sample. Two streams
//! with different keys are independent ChaCha8 streams, so samples can be
//! drawn on any thread in any order and the results are bit-identical.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SampleRng = ChaCha8Rng;

/// A seed together with a domain tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Substreams {
    pub seed: u64,
    pub domain: u64,
}

impl Substreams {
    pub fn new(seed: u64, domain: u64) -> Self {
        Self { seed, domain }
    }

    /// The generator for sample `index`.
    pub fn stream(&self, index: u64) -> SampleRng {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(self.seed ^ splitmix64(self.domain)));
        rng.set_stream(index);
        rng
    }

    /// A child family, e.g. one per fixture inside a suite.
    pub fn child(&self, tag: u64) -> Self {
        Self {
            seed: self.seed,
            domain: splitmix64(self.domain ^ splitmix64(tag)),
        }
    }
}

/// Domain tag from a string, for readable suite names.
pub fn domain_tag(name: &str) -> u64 {
    // FNV-1a
    name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
