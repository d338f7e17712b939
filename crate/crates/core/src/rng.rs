//! Seed derivation. All randomness flows from ChaCha8 streams keyed by
//! `derive(master, tags...)`, so any episode can be replayed in isolation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a master seed with a sequence of tags into a child seed.
pub fn derive(master: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(splitmix64(master), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream tags, kept distinct so unrelated consumers never share a stream.
pub mod stream {
    pub const INIT: u64 = 1;
    pub const EPISODE: u64 = 2;
    pub const DYNAMICS: u64 = 3;
    pub const REPLAY: u64 = 4;
    pub const POLICY: u64 = 5;
}
