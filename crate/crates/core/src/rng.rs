//! Seed derivation. One user seed feeds every random consumer through
//! independent streams keyed by a small label path.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream labels, so generation and factorisation never share a stream.
pub mod stream {
    pub const RANDOM_NETWORK: u64 = 1;
    pub const LAYERED: u64 = 2;
    pub const CATALOG: u64 = 3;
    pub const LOWRANK: u64 = 4;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(base), |acc, &label| splitmix64(acc ^ splitmix64(label)))
}

pub fn rng_for(base: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, path))
}
