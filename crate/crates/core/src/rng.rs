//! Seeded generators.
//!
//! Every stochastic step takes an explicit generator. Per-item generators are
//! derived from `(seed, key)` so results do not depend on processing order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for the item named `key` under the run seed `seed`.
pub fn derive(seed: u64, key: &str) -> SeededRng {
    // FNV-1a over the key, then one splitmix64 round to mix in the seed.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in key.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    seeded(splitmix64(seed ^ h))
}

/// Generator for the `index`-th stage (epoch, scene number, ...) of a run.
pub fn derive_indexed(seed: u64, index: u64) -> SeededRng {
    seeded(splitmix64(seed.wrapping_add(splitmix64(index))))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derived_streams_are_stable_and_distinct() {
        let a: u64 = derive(7, "scene_001").random();
        let b: u64 = derive(7, "scene_001").random();
        let c: u64 = derive(7, "scene_002").random();
        let d: u64 = derive(8, "scene_001").random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
        let e: u64 = derive_indexed(7, 3).random();
        assert_ne!(e, derive_indexed(7, 4).random::<u64>());
    }
}
