//! Seed derivation. Every random object in the crate is generated from a
//! `u64` seed mixed with structural coordinates (tree index, worker index,
//! block index, ...), so results never depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[inline]
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Combines a seed with one more coordinate.
#[inline]
pub fn derive(seed: u64, salt: u64) -> u64 {
    splitmix64(seed ^ splitmix64(salt.wrapping_add(0x6A09_E667_F3BC_C909)))
}

pub fn derive_all(seed: u64, salts: &[u64]) -> u64 {
    salts.iter().fold(seed, |s, &x| derive(s, x))
}

pub fn rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Order-sensitive fingerprint of a sequence of words.
#[derive(Debug, Clone, Copy)]
pub struct Fingerprint(u64);

impl Default for Fingerprint {
    fn default() -> Self {
        Fingerprint(0xCBF2_9CE4_8422_2325)
    }
}

impl Fingerprint {
    pub fn push(&mut self, word: u64) {
        self.0 = splitmix64(self.0 ^ word).rotate_left(17) ^ word;
    }

    pub fn finish(self) -> u64 {
        splitmix64(self.0)
    }
}
