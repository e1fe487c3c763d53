//! Seeds and the random generator used everywhere in the crate.
//!
//! Every sampler takes an [`RngSeed`] and builds a ChaCha8 stream from it
//! with `rand_chacha::ChaCha8Rng::seed_from_u64`, which expands the 64-bit
//! seed into the 256-bit key via the PCG32 recipe documented in `rand_core`.
//! Child seeds for replicas and tasks come from [`derive_seed`], a SplitMix64
//! step keyed by the task index.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// The generator behind every sampler.
pub type SimRng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn rng(self) -> SimRng {
        SimRng::seed_from_u64(self.0)
    }

    /// Child seed for task `index`; see [`derive_seed`].
    pub fn child(self, index: u64) -> RngSeed {
        derive_seed(self, index)
    }
}

impl From<u64> for RngSeed {
    fn from(value: u64) -> Self {
        RngSeed(value)
    }
}

impl std::fmt::Display for RngSeed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// SplitMix64 finalizer. A bijection on `u64`.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `mix64(master + (index + 1) * GOLDEN_GAMMA)`.
///
/// For a fixed master the map is injective in `index`: the gamma is odd, so
/// the affine step is a bijection mod 2^64, and `mix64` is a bijection.
pub fn derive_seed(master: RngSeed, index: u64) -> RngSeed {
    RngSeed(mix64(
        master
            .0
            .wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)),
    ))
}
