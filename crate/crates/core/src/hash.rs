//! Seeded hashing and invertible permutations shared by every filter.
//!
//! Filters never look at user keys directly. A key is reduced to a 64-bit
//! digest by [`HashFunction64`], and the cuckoo variants then quotient a
//! prefix of that digest through a [`FeistelPermutation`], which can be
//! inverted to recover the prefix from a bucket index and fingerprint.

use crate::error::{Error, Result};

/// A seeded 64-bit hash of arbitrary byte strings (XXH3).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HashFunction64 {
    seed: u64,
}

impl HashFunction64 {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    pub fn hash(&self, key: &[u8]) -> u64 {
        xxhash_rust::xxh3::xxh3_64_with_seed(key, self.seed)
    }

    /// Hashes the little-endian encoding of `key`.
    #[inline]
    pub fn hash_u64(&self, key: u64) -> u64 {
        self.hash(&key.to_le_bytes())
    }
}

/// SplitMix64 stream used to expand one user seed into every per-filter
/// secret: hash seed, permutation round keys and the eviction generator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeedSequence {
    state: u64,
}

impl SeedSequence {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn state(&self) -> u64 {
        self.state
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        mix64(self.state)
    }

    /// Uniform value in `0..bound` (bound > 0). Slightly biased for bounds
    /// that are not powers of two, which does not matter for victim choice.
    #[inline]
    pub fn below(&mut self, bound: u64) -> u64 {
        ((self.next_u64() as u128 * bound as u128) >> 64) as u64
    }
}

/// The SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub const FEISTEL_ROUNDS: usize = 4;
pub const MIN_PERMUTATION_WIDTH: u32 = 4;
pub const MAX_PERMUTATION_WIDTH: u32 = 64;

/// Coefficients of the multiply-add-shift round functions. Multipliers are
/// always odd.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RoundKeys([(u64, u64); FEISTEL_ROUNDS]);

impl RoundKeys {
    pub fn from_seeds(seeds: &mut SeedSequence) -> Self {
        let mut keys = [(0, 0); FEISTEL_ROUNDS];
        for key in keys.iter_mut() {
            *key = (seeds.next_u64() | 1, seeds.next_u64());
        }
        Self(keys)
    }
}

/// A seeded bijection on `width`-bit integers.
///
/// The value is split into a high half of `ceil(width / 2)` bits and a low
/// half of `floor(width / 2)` bits. Rounds alternate between xoring the high
/// half with a hash of the low half and vice versa, so odd widths work
/// without padding. The round function is 2-independent multiply-shift:
/// the top bits of `a * x + b` over 64-bit words.
///
/// The same [`RoundKeys`] can be reused at any width; filters rely on that
/// when their address space grows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FeistelPermutation {
    keys: RoundKeys,
    width: u32,
    high_bits: u32,
    low_bits: u32,
}

impl FeistelPermutation {
    pub fn new(keys: RoundKeys, width: u32) -> Result<Self> {
        if !(MIN_PERMUTATION_WIDTH..=MAX_PERMUTATION_WIDTH).contains(&width) {
            return Err(Error::Config(format!(
                "permutation width {width} outside [{MIN_PERMUTATION_WIDTH}, {MAX_PERMUTATION_WIDTH}]"
            )));
        }
        let low_bits = width / 2;
        Ok(Self {
            keys,
            width,
            high_bits: width - low_bits,
            low_bits,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn keys(&self) -> RoundKeys {
        self.keys
    }

    /// The same round keys over a different domain.
    pub fn with_width(&self, width: u32) -> Result<Self> {
        Self::new(self.keys, width)
    }

    #[inline]
    fn round(&self, i: usize, x: u64, out_bits: u32) -> u64 {
        let (a, b) = self.keys.0[i];
        a.wrapping_mul(x).wrapping_add(b) >> (64 - out_bits)
    }

    #[inline]
    pub fn permute(&self, x: u64) -> u64 {
        debug_assert!(self.width == 64 || x >> self.width == 0);
        let mut high = x >> self.low_bits;
        let mut low = x & low_mask(self.low_bits);
        for i in 0..FEISTEL_ROUNDS {
            if i % 2 == 0 {
                high ^= self.round(i, low, self.high_bits);
            } else {
                low ^= self.round(i, high, self.low_bits);
            }
        }
        (high << self.low_bits) | low
    }

    #[inline]
    pub fn invert(&self, y: u64) -> u64 {
        debug_assert!(self.width == 64 || y >> self.width == 0);
        let mut high = y >> self.low_bits;
        let mut low = y & low_mask(self.low_bits);
        for i in (0..FEISTEL_ROUNDS).rev() {
            if i % 2 == 0 {
                high ^= self.round(i, low, self.high_bits);
            } else {
                low ^= self.round(i, high, self.low_bits);
            }
        }
        (high << self.low_bits) | low
    }
}

/// `bits` ones in the low end of a word; `bits` may be 64.
#[inline]
pub(crate) fn low_mask(bits: u32) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}
