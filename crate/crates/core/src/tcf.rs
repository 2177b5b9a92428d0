//! Taffy cuckoo filter.
//!
//! A two-sided bucketed cuckoo table that quotients the first `a + F` bits
//! of each digest. Side `i` permutes those bits with its own Feistel
//! permutation; the high `a` bits of the result address a bucket and the low
//! `F` bits are stored as the fingerprint, next to up to `T` unpermuted tail
//! bits. Because the permutation is invertible, an element can always be
//! turned back into its key prefix, which is what makes eviction and
//! doubling possible without the original keys.

use crate::error::{Error, Result};
use crate::filter::{GrowableFilter, Membership};
use crate::hash::{low_mask, FeistelPermutation, HashFunction64, RoundKeys, SeedSequence};
use crate::packed::PackedArray;
use crate::slot::{decode_slot, encode_slot, key_prefix, key_tail, slot_is_empty, Element, Tail, TAIL_BITS};

pub const FINGERPRINT_BITS: u32 = 10;
pub const BUCKET_SLOTS: usize = 4;
pub const MAX_KICKS: usize = 64;
/// The table grows once the stash holds more than this many elements.
pub const MAX_STASH: usize = 4;
/// Occupancy threshold as a fraction of all slots, in tenths.
pub const MAX_LOAD_TENTHS: usize = 9;
pub const MAX_LOG_BUCKETS: u32 = 64 - FINGERPRINT_BITS - TAIL_BITS;

/// Splits a permuted prefix into (bucket index, fingerprint).
#[inline]
pub fn split_permuted(permuted: u64, fingerprint_bits: u32) -> (u64, u64) {
    (permuted >> fingerprint_bits, permuted & low_mask(fingerprint_bits))
}

/// Everything a cuckoo filter derives from its seed.
#[derive(Clone, Debug)]
pub(crate) struct Derived {
    pub hasher: HashFunction64,
    pub keys: [RoundKeys; 2],
    pub kicks: SeedSequence,
}

impl Derived {
    pub fn new(seed: u64) -> Self {
        let mut seeds = SeedSequence::new(seed);
        let hasher = HashFunction64::new(seeds.next_u64());
        let keys = [RoundKeys::from_seeds(&mut seeds), RoundKeys::from_seeds(&mut seeds)];
        let kicks = SeedSequence::new(seeds.next_u64());
        Self { hasher, keys, kicks }
    }
}

fn side_permutations(keys: &[RoundKeys; 2], log_buckets: u32) -> Result<[FeistelPermutation; 2]> {
    Ok([
        FeistelPermutation::new(keys[0], log_buckets + FINGERPRINT_BITS)?,
        FeistelPermutation::new(keys[1], log_buckets + FINGERPRINT_BITS)?,
    ])
}

fn check_log_buckets(log_buckets: u32) -> Result<()> {
    if log_buckets > MAX_LOG_BUCKETS {
        Err(Error::Capacity(format!(
            "{log_buckets} address bits leave no room for {FINGERPRINT_BITS}-bit fingerprints and {TAIL_BITS}-bit tails"
        )))
    } else {
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Tcf {
    seed: u64,
    hasher: HashFunction64,
    keys: [RoundKeys; 2],
    perms: [FeistelPermutation; 2],
    log_buckets: u32,
    /// One array per side, `2^a * BUCKET_SLOTS` words, bucket-major.
    slots: [Vec<u16>; 2],
    stash: Vec<Element>,
    occupied: usize,
    kicks: SeedSequence,
    upsizes: u64,
}

impl Tcf {
    /// An empty filter at its smallest size: one bucket per side.
    pub fn new(seed: u64) -> Self {
        Self::with_log_buckets(0, seed).expect("zero address bits is always valid")
    }

    /// An empty filter with `2^log_buckets` buckets per side.
    pub fn with_log_buckets(log_buckets: u32, seed: u64) -> Result<Self> {
        check_log_buckets(log_buckets)?;
        let derived = Derived::new(seed);
        let slots_per_side = BUCKET_SLOTS << log_buckets;
        Ok(Self {
            seed,
            hasher: derived.hasher,
            perms: side_permutations(&derived.keys, log_buckets)?,
            keys: derived.keys,
            log_buckets,
            slots: [vec![0; slots_per_side], vec![0; slots_per_side]],
            stash: Vec::new(),
            occupied: 0,
            kicks: derived.kicks,
            upsizes: 0,
        })
    }

    pub(crate) fn from_parts(
        seed: u64,
        log_buckets: u32,
        slots: [Vec<u16>; 2],
        stash: Vec<Element>,
        kick_state: u64,
    ) -> Result<Self> {
        let mut f = Self::with_log_buckets(log_buckets, seed)?;
        let expected = BUCKET_SLOTS << log_buckets;
        if slots.iter().any(|s| s.len() != expected) {
            return Err(Error::Malformed("slot array length does not match bucket count".into()));
        }
        for e in &stash {
            e.check()?;
            if e.prefix_bits != f.prefix_bits() {
                return Err(Error::Malformed("stash entry has the wrong prefix width".into()));
            }
        }
        let filled: usize = slots
            .iter()
            .map(|s| s.iter().filter(|&&w| !slot_is_empty(w)).count())
            .sum();
        if slots.iter().flatten().any(|&w| slot_is_empty(w) && w != 0) {
            return Err(Error::Malformed("empty slot with nonzero fingerprint bits".into()));
        }
        f.occupied = filled + stash.len();
        f.slots = slots;
        f.stash = stash;
        f.kicks = SeedSequence::new(kick_state);
        Ok(f)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn log_buckets(&self) -> u32 {
        self.log_buckets
    }

    /// Width of the quotiented key prefix, `a + F`.
    pub fn prefix_bits(&self) -> u32 {
        self.log_buckets + FINGERPRINT_BITS
    }

    pub fn occupied(&self) -> usize {
        self.occupied
    }

    pub fn capacity_slots(&self) -> usize {
        2 * (BUCKET_SLOTS << self.log_buckets)
    }

    pub fn stash(&self) -> &[Element] {
        &self.stash
    }

    pub fn slots(&self, side: usize) -> &[u16] {
        &self.slots[side]
    }

    pub fn permutation(&self, side: usize) -> &FeistelPermutation {
        &self.perms[side]
    }

    /// Number of doublings since construction.
    pub fn upsizes(&self) -> u64 {
        self.upsizes
    }

    pub(crate) fn kick_state(&self) -> u64 {
        self.kicks.state()
    }

    #[inline]
    fn locate(&self, side: usize, prefix: u64) -> (usize, u64) {
        let (bucket, fp) = split_permuted(self.perms[side].permute(prefix), FINGERPRINT_BITS);
        (bucket as usize, fp)
    }

    /// The key prefix of an element stored at `(side, bucket)` with `fingerprint`.
    #[inline]
    pub fn reconstruct(&self, side: usize, bucket: usize, fingerprint: u64) -> u64 {
        self.perms[side].invert(((bucket as u64) << FINGERPRINT_BITS) | fingerprint)
    }

    fn bucket(&self, side: usize, bucket: usize) -> &[u16] {
        &self.slots[side][bucket * BUCKET_SLOTS..(bucket + 1) * BUCKET_SLOTS]
    }

    /// Every stored element with its location; stash entries report `None`.
    pub fn elements(&self) -> Vec<(Option<(usize, usize)>, Element)> {
        let mut out = Vec::with_capacity(self.occupied);
        for side in 0..2 {
            for (i, &raw) in self.slots[side].iter().enumerate() {
                if let Some((fp, tail)) = decode_slot(raw) {
                    let bucket = i / BUCKET_SLOTS;
                    out.push((
                        Some((side, bucket)),
                        Element {
                            prefix_bits: self.prefix_bits(),
                            prefix: self.reconstruct(side, bucket, fp),
                            tail,
                        },
                    ));
                }
            }
        }
        out.extend(self.stash.iter().map(|&e| (None, e)));
        out
    }

    fn try_place(&mut self, side: usize, bucket: usize, raw: u16) -> bool {
        let base = bucket * BUCKET_SLOTS;
        for slot in &mut self.slots[side][base..base + BUCKET_SLOTS] {
            if slot_is_empty(*slot) {
                *slot = raw;
                return true;
            }
        }
        false
    }

    /// Places an element of the current prefix width, kicking others out if
    /// needed. Returns whatever is still homeless after `MAX_KICKS`.
    fn place(&mut self, mut element: Element) -> Option<Element> {
        debug_assert_eq!(element.prefix_bits, self.prefix_bits());
        for side in 0..2 {
            let (bucket, fp) = self.locate(side, element.prefix);
            if self.try_place(side, bucket, encode_slot(fp, element.tail)) {
                return None;
            }
        }
        let mut side = self.kicks.below(2) as usize;
        for _ in 0..MAX_KICKS {
            let (bucket, fp) = self.locate(side, element.prefix);
            let index = bucket * BUCKET_SLOTS + self.kicks.below(BUCKET_SLOTS as u64) as usize;
            let victim = std::mem::replace(&mut self.slots[side][index], encode_slot(fp, element.tail));
            let (victim_fp, victim_tail) = decode_slot(victim).expect("full bucket");
            element = Element {
                prefix_bits: self.prefix_bits(),
                prefix: self.reconstruct(side, bucket, victim_fp),
                tail: victim_tail,
            };
            side ^= 1;
            let (bucket, fp) = self.locate(side, element.prefix);
            if self.try_place(side, bucket, encode_slot(fp, element.tail)) {
                return None;
            }
        }
        Some(element)
    }

    fn over_limits(&self) -> bool {
        self.occupied * 10 > self.capacity_slots() * MAX_LOAD_TENTHS || self.stash.len() > MAX_STASH
    }

    /// Doubles the number of buckets per side, moving one tail bit of every
    /// element into its prefix. Elements with empty tails become two.
    pub fn upsize(&mut self) -> Result<()> {
        let log_buckets = self.log_buckets + 1;
        check_log_buckets(log_buckets)?;
        let elements: Vec<Element> = self.elements().into_iter().map(|(_, e)| e).collect();
        let slots_per_side = BUCKET_SLOTS << log_buckets;
        self.perms = side_permutations(&self.keys, log_buckets)?;
        self.log_buckets = log_buckets;
        self.slots = [vec![0; slots_per_side], vec![0; slots_per_side]];
        self.stash.clear();
        self.occupied = 0;
        for e in elements {
            for moved in e.lengthen_to(self.prefix_bits()) {
                self.occupied += 1;
                if let Some(homeless) = self.place(moved) {
                    self.stash.push(homeless);
                }
            }
        }
        self.upsizes += 1;
        Ok(())
    }

    /// Drops every tail, keeping only fingerprints.
    pub fn freeze(&self) -> FrozenTcf {
        let mut codes = PackedArray::new(FROZEN_CODE_BITS, self.capacity_slots());
        for side in 0..2 {
            for (i, &raw) in self.slots[side].iter().enumerate() {
                if let Some((fp, _)) = decode_slot(raw) {
                    codes.set(side * self.slots[0].len() + i, (fp << 1) | 1);
                }
            }
        }
        FrozenTcf {
            seed: self.seed,
            hasher: self.hasher,
            perms: self.perms,
            log_buckets: self.log_buckets,
            codes,
            stash: self.stash.iter().map(|e| e.prefix).collect(),
        }
    }

    #[cfg(test)]
    pub(crate) fn slots_mut(&mut self, side: usize) -> &mut [u16] {
        &mut self.slots[side]
    }
}

impl Membership for Tcf {
    fn hasher(&self) -> HashFunction64 {
        self.hasher
    }

    fn contains_digest(&self, digest: u64) -> bool {
        let width = self.prefix_bits();
        let prefix = key_prefix(digest, width);
        let tail = key_tail(digest, width);
        for side in 0..2 {
            let (bucket, fp) = self.locate(side, prefix);
            for &raw in self.bucket(side, bucket) {
                if let Some((stored_fp, stored_tail)) = decode_slot(raw) {
                    if stored_fp == fp && stored_tail.is_prefix_of(tail) {
                        return true;
                    }
                }
            }
        }
        self.stash.iter().any(|e| e.matches(digest))
    }

    fn allocated_bytes(&self) -> usize {
        self.capacity_slots() * 2
    }
}

impl GrowableFilter for Tcf {
    fn insert_digest(&mut self, digest: u64) -> Result<()> {
        // A key that already matches stays matched through every upsize, and
        // storing copies of one key would exhaust its buckets.
        if self.contains_digest(digest) {
            return Ok(());
        }
        let element = Element::of_key(digest, self.prefix_bits());
        self.occupied += 1;
        if let Some(homeless) = self.place(element) {
            self.stash.push(homeless);
        }
        while self.over_limits() {
            let (occupied, capacity) = (self.occupied, self.capacity_slots());
            self.upsize()?;
            // Empty tails duplicate on upsize, so a table full of them gains
            // no room; stop once the stash fits instead of doubling forever.
            if self.stash.len() <= MAX_STASH && self.occupied * capacity >= occupied * self.capacity_slots() {
                break;
            }
        }
        Ok(())
    }
}

/// Frozen slot code: `fingerprint << 1 | occupied`.
pub const FROZEN_CODE_BITS: u32 = FINGERPRINT_BITS + 1;

/// A read-only taffy cuckoo filter without tails.
///
/// Every key a [`Tcf`] accepts is still accepted, at a higher false
/// positive rate, in `F + 1` bits per slot.
#[derive(Clone, Debug)]
pub struct FrozenTcf {
    seed: u64,
    hasher: HashFunction64,
    perms: [FeistelPermutation; 2],
    log_buckets: u32,
    codes: PackedArray,
    stash: Vec<u64>,
}

impl FrozenTcf {
    pub(crate) fn from_parts(seed: u64, log_buckets: u32, codes: PackedArray, stash: Vec<u64>) -> Result<Self> {
        check_log_buckets(log_buckets)?;
        let derived = Derived::new(seed);
        if codes.width() != FROZEN_CODE_BITS || codes.len() != 2 * (BUCKET_SLOTS << log_buckets) {
            return Err(Error::Malformed("frozen slot array does not match bucket count".into()));
        }
        if stash.iter().any(|&p| p >> (log_buckets + FINGERPRINT_BITS) != 0) {
            return Err(Error::Malformed("frozen stash prefix too wide".into()));
        }
        Ok(Self {
            seed,
            hasher: derived.hasher,
            perms: side_permutations(&derived.keys, log_buckets)?,
            log_buckets,
            codes,
            stash,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn log_buckets(&self) -> u32 {
        self.log_buckets
    }

    pub fn codes(&self) -> &PackedArray {
        &self.codes
    }

    pub fn stash(&self) -> &[u64] {
        &self.stash
    }

    fn slots_per_side(&self) -> usize {
        BUCKET_SLOTS << self.log_buckets
    }

    /// Rebuilds a growable filter in which every tail is empty.
    pub fn thaw(&self) -> Tcf {
        let per_side = self.slots_per_side();
        let mut slots = [vec![0u16; per_side], vec![0u16; per_side]];
        for (side, words) in slots.iter_mut().enumerate() {
            for (i, w) in words.iter_mut().enumerate() {
                let code = self.codes.get(side * per_side + i);
                if code & 1 == 1 {
                    *w = encode_slot(code >> 1, Tail::EMPTY);
                }
            }
        }
        let stash = self
            .stash
            .iter()
            .map(|&prefix| Element {
                prefix_bits: self.log_buckets + FINGERPRINT_BITS,
                prefix,
                tail: Tail::EMPTY,
            })
            .collect();
        let kicks = Derived::new(self.seed).kicks.state();
        Tcf::from_parts(self.seed, self.log_buckets, slots, stash, kicks)
            .expect("frozen layout matches a thawed filter")
    }
}

impl Membership for FrozenTcf {
    fn hasher(&self) -> HashFunction64 {
        self.hasher
    }

    fn contains_digest(&self, digest: u64) -> bool {
        let prefix = key_prefix(digest, self.log_buckets + FINGERPRINT_BITS);
        let per_side = self.slots_per_side();
        for side in 0..2 {
            let (bucket, fp) = split_permuted(self.perms[side].permute(prefix), FINGERPRINT_BITS);
            let want = (fp << 1) | 1;
            let base = side * per_side + bucket as usize * BUCKET_SLOTS;
            if (base..base + BUCKET_SLOTS).any(|i| self.codes.get(i) == want) {
                return true;
            }
        }
        self.stash.contains(&prefix)
    }

    fn allocated_bytes(&self) -> usize {
        self.codes.bytes()
    }
}
