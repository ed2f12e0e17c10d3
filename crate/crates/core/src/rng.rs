//! Seed derivation. Every random stream in the crate descends from one
//! 64-bit master seed through keyed splits, so results never depend on
//! execution order or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

/// Counter-based generator used for all simulation.
pub type SimRng = ChaCha12Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed(pub u64);

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Seed {
    pub fn child(self, key: u64) -> Seed {
        Seed(splitmix64(splitmix64(self.0) ^ key.wrapping_mul(0xd605_bbb5_8c8a_bbed)))
    }

    pub fn derive(self, keys: &[u64]) -> Seed {
        keys.iter().fold(self, |s, &k| s.child(k))
    }

    pub fn rng(self) -> SimRng {
        SimRng::seed_from_u64(self.0)
    }
}

impl From<u64> for Seed {
    fn from(v: u64) -> Self {
        Seed(v)
    }
}
