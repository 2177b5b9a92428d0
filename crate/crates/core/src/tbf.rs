//! Taffy block filter: a growable stack of split block Bloom filters.
//!
//! Level `i` (counting from 1) is sized for `2^i` keys at false positive rate
//! `6ε / (i²π²)`, so the sum over all levels never exceeds `ε`. Inserts go to
//! the newest level; once it has taken `2^i` inserts a new level is appended.
//! Lookups probe every level, so they cost one block access per level.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::filter::{GrowableFilter, Membership};
use crate::hash::{mix64, HashFunction64, SeedSequence};
use crate::sbbf::{Sbbf, SbbfParams};

/// Highest level index; `2^i` must stay representable.
pub const MAX_LEVEL: u32 = 62;

/// False positive target of level `level` (1-based) under budget `epsilon`.
pub fn level_target(epsilon: f64, level: u32) -> f64 {
    let i = level as f64;
    6.0 * epsilon / (i * i * PI * PI)
}

pub fn level_capacity(level: u32) -> u64 {
    1u64 << level
}

pub fn level_params(epsilon: f64, level: u32) -> Result<SbbfParams> {
    SbbfParams::for_load(level_capacity(level), level_target(epsilon, level))
}

#[derive(Clone, Debug)]
pub struct Tbf {
    epsilon: f64,
    seed: u64,
    hasher: HashFunction64,
    levels: Vec<Sbbf>,
    inserts_in_current: u64,
}

impl Tbf {
    pub fn new(epsilon: f64, seed: u64) -> Result<Self> {
        check_epsilon(epsilon)?;
        Ok(Self {
            epsilon,
            seed,
            hasher: hasher_for(seed),
            levels: vec![Sbbf::new(level_params(epsilon, 1)?)],
            inserts_in_current: 0,
        })
    }

    pub(crate) fn from_parts(
        epsilon: f64,
        seed: u64,
        levels: Vec<Sbbf>,
        inserts_in_current: u64,
    ) -> Result<Self> {
        check_epsilon(epsilon)?;
        if levels.is_empty() || levels.len() > MAX_LEVEL as usize {
            return Err(Error::Malformed(format!("{} block filter levels", levels.len())));
        }
        if inserts_in_current >= level_capacity(levels.len() as u32) {
            return Err(Error::Malformed("current level over capacity".into()));
        }
        Ok(Self {
            epsilon,
            seed,
            hasher: hasher_for(seed),
            levels,
            inserts_in_current,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn levels(&self) -> &[Sbbf] {
        &self.levels
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    pub fn inserts_in_current(&self) -> u64 {
        self.inserts_in_current
    }

    /// Lookup that also reports how many levels were probed.
    pub fn contains_counting(&self, digest: u64) -> (bool, usize) {
        for (i, level) in self.levels.iter().enumerate() {
            if level.contains(level_digest(digest, i)) {
                return (true, i + 1);
            }
        }
        (false, self.levels.len())
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("epsilon {epsilon} must lie in (0, 1)")))
    }
}

fn hasher_for(seed: u64) -> HashFunction64 {
    HashFunction64::new(SeedSequence::new(seed).next_u64())
}

/// Levels see independent-looking digests so their false positives do not
/// line up.
#[inline]
fn level_digest(digest: u64, level: usize) -> u64 {
    mix64(digest ^ (level as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

impl Membership for Tbf {
    fn hasher(&self) -> HashFunction64 {
        self.hasher
    }

    fn contains_digest(&self, digest: u64) -> bool {
        self.contains_counting(digest).0
    }

    fn allocated_bytes(&self) -> usize {
        self.levels.iter().map(Sbbf::bytes).sum()
    }
}

impl GrowableFilter for Tbf {
    fn insert_digest(&mut self, digest: u64) -> Result<()> {
        let current = self.levels.len() - 1;
        self.levels[current].insert(level_digest(digest, current));
        self.inserts_in_current += 1;
        let level = self.levels.len() as u32;
        if self.inserts_in_current == level_capacity(level) {
            if level >= MAX_LEVEL {
                return Err(Error::Capacity("block filter level limit reached".into()));
            }
            self.levels.push(Sbbf::new(level_params(self.epsilon, level + 1)?));
            self.inserts_in_current = 0;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{check_no_false_negatives, measure_fpp, OracleSet};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn level_targets() {
        assert!((level_target(0.004, 1) - 0.002_431_708).abs() < 1e-8);
        assert!((level_target(0.004, 2) - 0.000_607_927).abs() < 1e-8);
        let total: f64 = (1..2_000_000).map(|i| level_target(0.004, i)).sum();
        assert!(total <= 0.004);
        assert!((total - 0.004).abs() < 1e-8);
    }

    #[test]
    fn starts_with_one_level_for_two_keys() {
        let f = Tbf::new(0.004, 1).unwrap();
        assert_eq!(f.level_count(), 1);
        assert_eq!(f.levels()[0].params(), level_params(0.004, 1).unwrap());
        assert!(!f.contains_digest(123));
    }

    #[test]
    fn bad_epsilon() {
        assert!(Tbf::new(0.0, 1).is_err());
        assert!(Tbf::new(1.0, 1).is_err());
    }

    #[test]
    fn second_level_after_two_inserts() {
        let mut f = Tbf::new(0.004, 1).unwrap();
        f.insert_digest(1).unwrap();
        assert_eq!(f.level_count(), 1);
        f.insert_digest(2).unwrap();
        assert_eq!(f.level_count(), 2);
        assert_eq!(f.inserts_in_current(), 0);
        assert_eq!(f.levels()[1].params(), level_params(0.004, 2).unwrap());
    }

    /// Number of levels after `n` inserts, by walking the fill schedule.
    fn levels_after(n: u64) -> usize {
        let mut remaining = n;
        let mut level = 1u32;
        loop {
            let cap = 1u64 << level;
            if remaining < cap {
                return level as usize;
            }
            remaining -= cap;
            level += 1;
        }
    }

    #[test]
    fn level_count_follows_schedule() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut f = Tbf::new(0.004, 3).unwrap();
        for n in 1..=5000u64 {
            f.insert_digest(rng.random()).unwrap();
            assert_eq!(f.level_count(), levels_after(n));
            assert!(f.inserts_in_current() < level_capacity(f.level_count() as u32));
        }
        assert_eq!(levels_after(1_000_000), 19);
    }

    #[test]
    fn negative_lookup_probes_every_level() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut f = Tbf::new(0.004, 3).unwrap();
        let mut oracle = OracleSet::new();
        for _ in 0..3000 {
            let d = rng.random();
            oracle.insert(d);
            f.insert_digest(d).unwrap();
        }
        let mut checked = 0;
        while checked < 1000 {
            let d: u64 = rng.random();
            let (hit, probes) = f.contains_counting(d);
            if !hit {
                assert_eq!(probes, f.level_count());
                checked += 1;
            }
        }
        assert!(check_no_false_negatives(&f, &oracle));
    }

    #[test]
    fn space_and_fpp_at_a_million() {
        let n = 1_000_000u64;
        let epsilon = 0.004;
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut f = Tbf::new(epsilon, 10).unwrap();
        let mut oracle = OracleSet::new();
        for _ in 0..n {
            let d = rng.random();
            oracle.insert(d);
            f.insert_digest(d).unwrap();
        }
        assert_eq!(f.level_count(), 19);

        let expected_bytes: usize = (1..=f.level_count() as u32)
            .map(|i| level_params(epsilon, i).unwrap().bytes())
            .sum();
        assert_eq!(f.allocated_bytes(), expected_bytes);

        let bits_per_key = f.allocated_bytes() as f64 * 8.0 / n as f64;
        let reference = ((1.0 / epsilon).log2() + (n as f64).log2().log2()) / std::f64::consts::LN_2;
        assert!(bits_per_key >= reference && bits_per_key <= 3.0 * reference, "{bits_per_key}");

        let est = measure_fpp(&f, &oracle, 1_000_000, 11).unwrap();
        assert!(est.within(epsilon), "{est:?}");
    }
}
