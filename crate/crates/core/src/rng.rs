//! Seed derivation and the generator used by every simulation path.
//!
//! Path `p` of a run with master seed `m` draws from
//! `ChaCha8Rng::seed_from_u64(derive_seed(m, p))`, where
//! `derive_seed(m, p) = splitmix64(m ^ splitmix64(p + 0x9E3779B97F4A7C15))`.
//! The mix is fixed; changing it breaks reproducibility of stored manifests.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type PathRng = ChaCha8Rng;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index.wrapping_add(0x9E37_79B9_7F4A_7C15)))
}

pub fn path_rng(master: u64, index: u64) -> PathRng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, index))
}

pub fn rng_from_seed(seed: u64) -> PathRng {
    ChaCha8Rng::seed_from_u64(seed)
}
