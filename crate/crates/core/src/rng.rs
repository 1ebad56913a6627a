//! Seed derivation and per-face hash coins.
//!
//! Every replication owns an independent stream seeded by
//! `derive_seed(master, index)`. Thinning coins are a pure function of
//! `(seed, vertex tuple)`, so the same geometric face sees the same coin
//! whatever order faces are visited in, and runs with different retention
//! vectors stay coupled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used for every sampling stream.
pub type StreamRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for stream `index` under `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master.wrapping_add(GOLDEN)) ^ index.wrapping_mul(GOLDEN).wrapping_add(1))
}

pub fn stream(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform in `[0, 1)` determined by `seed` and the vertex tuple.
pub fn face_uniform(seed: u64, vertices: &[u32]) -> f64 {
    let mut h = splitmix64(seed ^ 0xD6E8_FEB8_6659_FD93);
    for &v in vertices {
        h = splitmix64(h.wrapping_add(GOLDEN) ^ u64::from(v));
    }
    h = splitmix64(h ^ vertices.len() as u64);
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
