//! Counter-style seed derivation.
//!
//! Every random stream in the crate is addressed by a path of integers below
//! a master seed (for example `master / environment / axis / block`). Streams
//! are independent of iteration order and of the number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

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
    pub fn new(master: u64) -> Self {
        Seed(master)
    }

    /// Child stream identified by `tag`.
    pub fn derive(self, tag: u64) -> Seed {
        Seed(splitmix64(splitmix64(self.0) ^ tag.wrapping_mul(0xd6e8_feb8_6659_fd93)))
    }

    pub fn derive_path(self, tags: &[u64]) -> Seed {
        tags.iter().fold(self, |s, &t| s.derive(t))
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(splitmix64(self.0))
    }
}

impl From<u64> for Seed {
    fn from(v: u64) -> Self {
        Seed(v)
    }
}

/// Stable tags for the top-level streams.
pub mod tags {
    pub const ENVIRONMENT: u64 = 0x454e_5649;
    pub const NOISE: u64 = 0x4e4f_4953;
    pub const GFF: u64 = 0x4746_4600;
    pub const REPLICATE: u64 = 0x5245_504c;
}
