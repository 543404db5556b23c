//! Seed derivation.
//!
//! Every random stream in the crate is a [`ChaCha8Rng`] seeded from a `u64`
//! produced by [`seed_derive`]. The mixing function is fixed:
//!
//! ```text
//! key  = splitmix64_finalize(root) XOR ((t << 32) | k)    // t, k < 2^32
//! seed = splitmix64_finalize(key)
//! ```
//!
//! `splitmix64_finalize` is the SplitMix64 output function (add the golden
//! gamma, then two xor-shift-multiply rounds and a final xor-shift). It is a
//! bijection on `u64`, so for a fixed root distinct `(t, k)` pairs never
//! collide. Mixing the root first keeps nearby roots (0 and 1, say) from
//! producing the same set of streams under permuted indices. This function is part of the output format: changing it changes
//! every experiment result.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The random stream type used throughout the crate.
pub type SeededRng = ChaCha8Rng;

/// Reserved step index for streams that do not belong to an IMD step.
pub const AUX_STREAM: u64 = 0;
/// Reserved step index for the final completion draw.
pub const FINAL_STREAM: u64 = 0xFFFF_FFFF;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64_finalize(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the seed for step `t`, sample `k` under `root`.
///
/// Injective in `(t, k)` for `t, k < 2^32`.
pub fn seed_derive(root: u64, t: u64, k: u64) -> u64 {
    debug_assert!(t < (1 << 32) && k < (1 << 32));
    splitmix64_finalize(splitmix64_finalize(root) ^ ((t << 32) | (k & 0xFFFF_FFFF)))
}

pub fn rng_from_seed(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn distinct_samples_get_distinct_seeds() {
        assert_ne!(seed_derive(42, 1, 1), seed_derive(42, 1, 2));
        assert_ne!(seed_derive(42, 1, 2), seed_derive(42, 2, 1));
    }

    #[test]
    fn derivation_is_deterministic() {
        assert_eq!(seed_derive(7, 3, 4), seed_derive(7, 3, 4));
    }

    #[test]
    fn no_collisions_over_grid() {
        let mut seen = HashSet::new();
        for t in 0..400u64 {
            for k in 0..250u64 {
                assert!(seen.insert(seed_derive(0xDEAD_BEEF, t, k)));
            }
        }
        assert_eq!(seen.len(), 100_000);
    }

    #[test]
    fn neighbouring_roots_do_not_share_streams() {
        let a: HashSet<u64> = (0..1000).map(|k| seed_derive(0, 0, k)).collect();
        assert!((0..1000).all(|k| !a.contains(&seed_derive(1, 0, k))));
    }

    #[test]
    fn finalizer_is_stable() {
        // Pinned so that a change to the mixing function is caught.
        assert_eq!(splitmix64_finalize(0), 0xE220_A839_7B1D_CDAF);
    }
}
