//! Seed plumbing. One global seed fans out into named sub-streams so the
//! scene sampler, K-means, weight init and dropout can be re-seeded
//! independently while staying byte-reproducible.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a over arbitrary bytes; stable across platforms.
fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derive the sub-seed for `name` (e.g. "scene", "kmeans", "init", "dropout").
pub fn sub_seed(seed: u64, name: &str) -> u64 {
    fnv1a(seed, name.as_bytes())
}

/// Derive a sub-seed with an extra index, for per-clip or per-restart streams.
pub fn sub_seed_indexed(seed: u64, name: &str, index: u64) -> u64 {
    fnv1a(sub_seed(seed, name), &index.to_le_bytes())
}

/// Deterministic RNG for the named stream.
pub fn stream(seed: u64, name: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(sub_seed(seed, name))
}

/// Deterministic RNG for the named stream at `index`.
pub fn stream_indexed(seed: u64, name: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(sub_seed_indexed(seed, name, index))
}
