//! Counter-based seed derivation.
//!
//! Every random stream is keyed by `(master seed, index, stream name)`, so
//! results never depend on the order in which parallel jobs are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xCBF2_9CE4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3))
}

/// Child seed for replicate `index` of the stream `stream`.
pub fn child_seed(seed: u64, index: u64, stream: &str) -> u64 {
    let h = splitmix64(seed ^ fnv1a(stream));
    splitmix64(h ^ splitmix64(index.wrapping_add(0x632B_E59B_D9B4_E019)))
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn child_rng(seed: u64, index: u64, stream: &str) -> Rng {
    rng_from_seed(child_seed(seed, index, stream))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn child_seeds_differ_by_stream_and_index() {
        let a = child_seed(7, 0, "bootstrap");
        assert_ne!(a, child_seed(7, 1, "bootstrap"));
        assert_ne!(a, child_seed(7, 0, "data"));
        assert_ne!(a, child_seed(8, 0, "bootstrap"));
        assert_eq!(a, child_seed(7, 0, "bootstrap"));
    }
}
