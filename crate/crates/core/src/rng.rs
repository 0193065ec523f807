//! Counter-based random streams.
//!
//! A stream is addressed by `(seed, index)`: the seed keys a ChaCha8
//! generator and the index selects its 64-bit stream id. Draw `i` of any
//! resampling loop reads only from stream `(seed, i)`, so results do not
//! depend on evaluation order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

pub fn stream(seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Stable child seed for `(seed, label, index)`.
///
/// SHA-256 over a fixed byte layout, so the value is identical on every
/// platform and compiler version.
pub fn derive_seed(seed: u64, label: &str, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((label.len() as u64).to_le_bytes());
    h.update(label.as_bytes());
    h.update(index.to_le_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| 0).scan(stream(7, 3), |r, _| Some(r.random())).collect();
        let b: Vec<u64> = (0..4).map(|_| 0).scan(stream(7, 3), |r, _| Some(r.random())).collect();
        let c: Vec<u64> = (0..4).map(|_| 0).scan(stream(7, 4), |r, _| Some(r.random())).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn derived_seeds_depend_on_every_part() {
        let base = derive_seed(1, "manly", 0);
        assert_eq!(base, derive_seed(1, "manly", 0));
        assert_ne!(base, derive_seed(2, "manly", 0));
        assert_ne!(base, derive_seed(1, "ols", 0));
        assert_ne!(base, derive_seed(1, "manly", 1));
    }
}
