//! Exact reference set and false positive measurement.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::filter::Membership;

/// The exact set of digests a filter was fed.
#[derive(Clone, Debug, Default)]
pub struct OracleSet {
    digests: HashSet<u64>,
}

impl OracleSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, digest: u64) -> bool {
        self.digests.insert(digest)
    }

    pub fn contains(&self, digest: u64) -> bool {
        self.digests.contains(&digest)
    }

    pub fn len(&self) -> usize {
        self.digests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digests.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        self.digests.iter().copied()
    }
}

impl FromIterator<u64> for OracleSet {
    fn from_iter<I: IntoIterator<Item = u64>>(iter: I) -> Self {
        Self {
            digests: iter.into_iter().collect(),
        }
    }
}

/// A binomial estimate of a false positive rate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FppEstimate {
    pub positives: u64,
    pub probes: u64,
    pub rate: f64,
    pub sigma: f64,
}

impl FppEstimate {
    pub fn new(positives: u64, probes: u64) -> Self {
        assert!(probes > 0 && positives <= probes);
        let rate = positives as f64 / probes as f64;
        Self {
            positives,
            probes,
            rate,
            sigma: (rate * (1.0 - rate) / probes as f64).sqrt(),
        }
    }

    /// True when the rate is at most `bound` plus three standard errors.
    pub fn within(&self, bound: f64) -> bool {
        self.rate <= bound + 3.0 * self.sigma
    }
}

/// Every oracle member must be positive in `filter`.
pub fn check_no_false_negatives<F: Membership + ?Sized>(filter: &F, oracle: &OracleSet) -> bool {
    oracle.iter().all(|d| filter.contains_digest(d))
}

/// Oracle members the filter reports as absent.
pub fn false_negatives<F: Membership + ?Sized>(filter: &F, oracle: &OracleSet) -> Vec<u64> {
    oracle.iter().filter(|&d| !filter.contains_digest(d)).collect()
}

/// Probes `probes` random digests that are not oracle members.
pub fn measure_fpp<F: Membership + ?Sized>(
    filter: &F,
    oracle: &OracleSet,
    probes: u64,
    seed: u64,
) -> Result<FppEstimate> {
    if probes == 0 {
        return Err(Error::Config("fpp measurement needs at least one probe".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positives = 0u64;
    let mut drawn = 0u64;
    while drawn < probes {
        let digest: u64 = rng.random();
        if oracle.contains(digest) {
            continue;
        }
        drawn += 1;
        positives += u64::from(filter.contains_digest(digest));
    }
    Ok(FppEstimate::new(positives, probes))
}

/// Block number and per-lane bit offsets a split block Bloom filter of
/// `num_blocks` blocks must use for `digest`. Written against the format
/// definition, independently of [`crate::sbbf`].
pub fn sbbf_reference_bits(digest: u64, num_blocks: usize) -> (usize, [u32; 8]) {
    const MULTIPLIERS: [u64; 8] = [
        0x47b6137b, 0x44974d91, 0x8824ad5b, 0xa2b7289d, 0x705495c7, 0x2df1424b, 0x9efc4947,
        0x5c6bfb31,
    ];
    let block = (digest / (1u64 << 32)) % num_blocks as u64;
    let low = digest % (1u64 << 32);
    let mut bits = [0u32; 8];
    for (bit, m) in bits.iter_mut().zip(MULTIPLIERS) {
        let product = (low * m) % (1u64 << 32);
        *bit = (product / (1u64 << 27)) as u32;
    }
    (block as usize, bits)
}
