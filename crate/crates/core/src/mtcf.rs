//! Minimal taffy cuckoo filter.
//!
//! The table is split into `2^p` levels, each holding two bucket arrays (one
//! per side). Growth doubles one level at a time: levels below the cursor
//! have `2^(a+1)` buckets per side, the rest `2^a`. Because a doubled level
//! quotients one more address bit, fingerprints come in two sizes, `F` and
//! `F - 1`, and each side has two permutations:
//!
//! * the long permutation on `p + a + F` bits, whose output addresses either
//!   kind of level (`F`-bit fingerprint in a short level, `F - 1` in a
//!   doubled one);
//! * the short permutation on `p + a + F - 1` bits, which only addresses
//!   short levels and is skipped when it lands in a doubled one.
//!
//! A side's permutation keys depend only on the parity of the width. When the
//! cursor wraps and `a` grows by one, the old long permutation therefore
//! becomes the new short permutation and no stored element has to move.

use crate::error::{Error, Result};
use crate::filter::{GrowableFilter, Membership};
use crate::hash::{low_mask, FeistelPermutation, HashFunction64, RoundKeys, SeedSequence};
use crate::packed::PackedArray;
use crate::slot::{key_prefix, key_tail, Element, Lengthened, Tail, TAIL_BITS, TAIL_CODE_MASK};

pub const FINGERPRINT_BITS: u32 = 9;
pub const BUCKET_SLOTS: usize = 4;
pub const LOG_LEVELS: u32 = 5;
pub const LEVELS: usize = 1 << LOG_LEVELS;
pub const MAX_KICKS: usize = 64;
pub const MAX_STASH: usize = 4;
pub const MAX_LOAD_TENTHS: usize = 9;
pub const MAX_LOG_BUCKETS: u32 = 64 - LOG_LEVELS - FINGERPRINT_BITS - TAIL_BITS;

const LONG_FLAG: u16 = 1 << 15;
const FP_SHIFT: u32 = TAIL_BITS + 1;

/// Which of a side's two permutations addresses an element.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Width {
    Short = 0,
    Long = 1,
}

/// Where an element with a given permuted prefix lives.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Location {
    pub level: usize,
    pub side: usize,
    pub bucket: usize,
    pub fingerprint: u64,
    /// `true` for an `F`-bit fingerprint, `false` for `F - 1` bits.
    pub long_fingerprint: bool,
}

#[inline]
pub fn encode_slot(long_fingerprint: bool, fingerprint: u64, tail: Tail) -> u16 {
    (if long_fingerprint { LONG_FLAG } else { 0 }) | ((fingerprint as u16) << FP_SHIFT) | tail.code()
}

#[inline]
pub fn decode_slot(raw: u16) -> Option<(bool, u64, Tail)> {
    let tail = Tail::from_code(raw & TAIL_CODE_MASK)?;
    Some((raw & LONG_FLAG != 0, ((raw & !LONG_FLAG) >> FP_SHIFT) as u64, tail))
}

#[inline]
fn fingerprint_bits(long: bool) -> u32 {
    if long {
        FINGERPRINT_BITS
    } else {
        FINGERPRINT_BITS - 1
    }
}

fn check_log_buckets(log_buckets: u32) -> Result<()> {
    if log_buckets > MAX_LOG_BUCKETS {
        Err(Error::Capacity(format!(
            "{log_buckets} address bits per level exceed the 64-bit digest"
        )))
    } else {
        Ok(())
    }
}

#[derive(Clone, Debug)]
struct Derived {
    hasher: HashFunction64,
    /// Indexed by side, then width parity.
    keys: [[RoundKeys; 2]; 2],
    kicks: SeedSequence,
}

impl Derived {
    fn new(seed: u64) -> Self {
        let mut seeds = SeedSequence::new(seed);
        let hasher = HashFunction64::new(seeds.next_u64());
        let mut side = || [RoundKeys::from_seeds(&mut seeds), RoundKeys::from_seeds(&mut seeds)];
        let keys = [side(), side()];
        let kicks = SeedSequence::new(seeds.next_u64());
        Self { hasher, keys, kicks }
    }
}

/// Level sizes, cursor and permutations: everything needed to map a key to
/// its candidate buckets and back. Shared by the growable and frozen forms.
#[derive(Clone, Debug)]
struct Geometry {
    log_buckets: u32,
    cursor: usize,
    keys: [[RoundKeys; 2]; 2],
    /// Indexed by side, then [`Width`].
    perms: [[FeistelPermutation; 2]; 2],
}

impl Geometry {
    fn new(keys: [[RoundKeys; 2]; 2], log_buckets: u32, cursor: usize) -> Result<Self> {
        check_log_buckets(log_buckets)?;
        if cursor >= LEVELS {
            return Err(Error::Malformed(format!("cursor {cursor} out of range")));
        }
        let mut g = Self {
            log_buckets,
            cursor,
            keys,
            perms: [[FeistelPermutation::new(keys[0][0], 4)?; 2]; 2],
        };
        g.rebuild_perms()?;
        Ok(g)
    }

    fn rebuild_perms(&mut self) -> Result<()> {
        for side in 0..2 {
            for width in [Width::Short, Width::Long] {
                let bits = self.prefix_bits(width);
                self.perms[side][width as usize] =
                    FeistelPermutation::new(self.keys[side][(bits % 2) as usize], bits)?;
            }
        }
        Ok(())
    }

    #[inline]
    fn prefix_bits(&self, width: Width) -> u32 {
        LOG_LEVELS + self.log_buckets + FINGERPRINT_BITS - 1 + width as u32
    }

    fn width_of(&self, prefix_bits: u32) -> Option<Width> {
        if prefix_bits == self.prefix_bits(Width::Short) {
            Some(Width::Short)
        } else if prefix_bits == self.prefix_bits(Width::Long) {
            Some(Width::Long)
        } else {
            None
        }
    }

    #[inline]
    fn is_doubled(&self, level: usize) -> bool {
        level < self.cursor
    }

    #[inline]
    fn level_log_buckets(&self, level: usize) -> u32 {
        self.log_buckets + self.is_doubled(level) as u32
    }

    fn level_slots(&self, level: usize) -> usize {
        2 * (BUCKET_SLOTS << self.level_log_buckets(level))
    }

    fn total_slots(&self) -> usize {
        2 * BUCKET_SLOTS * ((LEVELS + self.cursor) << self.log_buckets)
    }

    #[inline]
    fn slot_index(&self, level: usize, side: usize, bucket: usize) -> usize {
        ((side << self.level_log_buckets(level)) + bucket) * BUCKET_SLOTS
    }

    /// The location of `prefix` through one permutation, or `None` when a
    /// short permutation lands in a doubled level.
    #[inline]
    fn locate(&self, side: usize, width: Width, prefix: u64) -> Option<Location> {
        let bits = self.prefix_bits(width);
        let permuted = self.perms[side][width as usize].permute(prefix);
        let level_shift = bits - LOG_LEVELS;
        let level = (permuted >> level_shift) as usize;
        let rest = permuted & low_mask(level_shift);
        let long_fingerprint = match (width, self.is_doubled(level)) {
            (Width::Short, true) => return None,
            (Width::Short, false) | (Width::Long, true) => false,
            (Width::Long, false) => true,
        };
        let fp_bits = fingerprint_bits(long_fingerprint);
        Some(Location {
            level,
            side,
            bucket: (rest >> fp_bits) as usize,
            fingerprint: rest & low_mask(fp_bits),
            long_fingerprint,
        })
    }

    /// Inverts the permutation behind a stored fingerprint, giving the
    /// element's prefix width and value.
    #[inline]
    fn reconstruct(&self, level: usize, side: usize, bucket: usize, long_fingerprint: bool, fingerprint: u64) -> (u32, u64) {
        let width = if self.is_doubled(level) || long_fingerprint {
            Width::Long
        } else {
            Width::Short
        };
        let bits = self.prefix_bits(width);
        let fp_bits = fingerprint_bits(long_fingerprint);
        let permuted = ((level as u64) << (bits - LOG_LEVELS)) | ((bucket as u64) << fp_bits) | fingerprint;
        (bits, self.perms[side][width as usize].invert(permuted))
    }

    /// Up to four candidate locations for a digest, long permutations
    /// first, each with the key tail that goes with it.
    #[inline]
    fn candidates(&self, digest: u64) -> [Option<(Location, u64)>; 4] {
        let mut out = [None; 4];
        for (i, width) in [Width::Long, Width::Short].into_iter().enumerate() {
            let bits = self.prefix_bits(width);
            let prefix = key_prefix(digest, bits);
            let tail = key_tail(digest, bits);
            for side in 0..2 {
                out[2 * i + side] = self.locate(side, width, prefix).map(|loc| (loc, tail));
            }
        }
        out
    }

    /// Advances the cursor after a level doubled; returns true on wrap.
    fn advance(&mut self) -> Result<bool> {
        self.cursor += 1;
        if self.cursor < LEVELS {
            return Ok(false);
        }
        check_log_buckets(self.log_buckets + 1)?;
        self.cursor = 0;
        self.log_buckets += 1;
        self.rebuild_perms()?;
        Ok(true)
    }
}

#[derive(Clone, Debug)]
pub struct Mtcf {
    seed: u64,
    hasher: HashFunction64,
    geometry: Geometry,
    /// Per level, both sides back to back, bucket-major.
    levels: Vec<Vec<u16>>,
    stash: Vec<Element>,
    occupied: usize,
    kicks: SeedSequence,
    upsizes: u64,
}

impl Mtcf {
    /// An empty filter at its smallest size: one bucket per side per level.
    pub fn new(seed: u64) -> Self {
        Self::with_log_buckets(0, seed).expect("zero address bits is always valid")
    }

    pub fn with_log_buckets(log_buckets: u32, seed: u64) -> Result<Self> {
        let derived = Derived::new(seed);
        let geometry = Geometry::new(derived.keys, log_buckets, 0)?;
        let levels = (0..LEVELS).map(|l| vec![0; geometry.level_slots(l)]).collect();
        Ok(Self {
            seed,
            hasher: derived.hasher,
            geometry,
            levels,
            stash: Vec::new(),
            occupied: 0,
            kicks: derived.kicks,
            upsizes: 0,
        })
    }

    pub(crate) fn from_parts(
        seed: u64,
        log_buckets: u32,
        cursor: usize,
        levels: Vec<Vec<u16>>,
        stash: Vec<Element>,
        kick_state: u64,
    ) -> Result<Self> {
        let derived = Derived::new(seed);
        let geometry = Geometry::new(derived.keys, log_buckets, cursor)?;
        if levels.len() != LEVELS || levels.iter().enumerate().any(|(l, s)| s.len() != geometry.level_slots(l)) {
            return Err(Error::Malformed("level sizes do not match cursor".into()));
        }
        for (level, slots) in levels.iter().enumerate() {
            for &raw in slots {
                match decode_slot(raw) {
                    None if raw != 0 => return Err(Error::Malformed("empty slot with nonzero bits".into())),
                    Some((true, _, _)) if geometry.is_doubled(level) => {
                        return Err(Error::Malformed("long fingerprint in a doubled level".into()))
                    }
                    Some((false, fp, _)) if fp >> (FINGERPRINT_BITS - 1) != 0 => {
                        return Err(Error::Malformed("short fingerprint too wide".into()))
                    }
                    _ => {}
                }
            }
        }
        for e in &stash {
            e.check()?;
            if e.prefix_bits > geometry.prefix_bits(Width::Long) {
                return Err(Error::Malformed("stash entry prefix too wide".into()));
            }
        }
        let filled: usize = levels.iter().flatten().filter(|&&w| w != 0).count();
        Ok(Self {
            seed,
            hasher: derived.hasher,
            geometry,
            levels,
            occupied: filled + stash.len(),
            stash,
            kicks: SeedSequence::new(kick_state),
            upsizes: 0,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `a`: log2 of the bucket count of an undoubled level side.
    pub fn log_buckets(&self) -> u32 {
        self.geometry.log_buckets
    }

    pub fn cursor(&self) -> usize {
        self.geometry.cursor
    }

    pub fn level_log_buckets(&self, level: usize) -> u32 {
        self.geometry.level_log_buckets(level)
    }

    pub fn level_slots(&self, level: usize) -> &[u16] {
        &self.levels[level]
    }

    pub fn prefix_bits(&self, width: Width) -> u32 {
        self.geometry.prefix_bits(width)
    }

    pub fn occupied(&self) -> usize {
        self.occupied
    }

    pub fn capacity_slots(&self) -> usize {
        self.geometry.total_slots()
    }

    pub fn stash(&self) -> &[Element] {
        &self.stash
    }

    pub fn upsizes(&self) -> u64 {
        self.upsizes
    }

    pub(crate) fn kick_state(&self) -> u64 {
        self.kicks.state()
    }

    /// Candidate locations inspected by a lookup of `digest`.
    pub fn candidate_locations(&self, digest: u64) -> Vec<Location> {
        self.geometry.candidates(digest).into_iter().flatten().map(|(loc, _)| loc).collect()
    }

    /// Every stored element with its location; stash entries report `None`.
    pub fn elements(&self) -> Vec<(Option<Location>, Element)> {
        let mut out = Vec::with_capacity(self.occupied);
        for (level, slots) in self.levels.iter().enumerate() {
            let per_side = slots.len() / 2;
            for (i, &raw) in slots.iter().enumerate() {
                if let Some((long_fingerprint, fingerprint, tail)) = decode_slot(raw) {
                    let (side, bucket) = (i / per_side, (i % per_side) / BUCKET_SLOTS);
                    let (prefix_bits, prefix) = self.geometry.reconstruct(level, side, bucket, long_fingerprint, fingerprint);
                    out.push((
                        Some(Location { level, side, bucket, fingerprint, long_fingerprint }),
                        Element { prefix_bits, prefix, tail },
                    ));
                }
            }
        }
        out.extend(self.stash.iter().map(|&e| (None, e)));
        out
    }

    #[inline]
    fn bucket(&self, loc: &Location) -> &[u16] {
        let base = self.geometry.slot_index(loc.level, loc.side, loc.bucket);
        &self.levels[loc.level][base..base + BUCKET_SLOTS]
    }

    fn try_place(&mut self, loc: &Location, tail: Tail) -> bool {
        let base = self.geometry.slot_index(loc.level, loc.side, loc.bucket);
        let raw = encode_slot(loc.long_fingerprint, loc.fingerprint, tail);
        for slot in &mut self.levels[loc.level][base..base + BUCKET_SLOTS] {
            if *slot == 0 {
                *slot = raw;
                return true;
            }
        }
        false
    }

    /// Brings an element to a width the current geometry can address,
    /// stealing tail bits (and duplicating on empty tails) as needed.
    fn normalize(&mut self, element: Element, out: &mut Vec<Element>) {
        let short = self.geometry.prefix_bits(Width::Short);
        if element.prefix_bits >= short {
            out.push(element);
            return;
        }
        let lengthened = element.lengthen_to(short);
        self.occupied += lengthened.len() - 1;
        out.extend(lengthened);
    }

    #[inline]
    fn has_room(&self, loc: &Location) -> bool {
        self.bucket(loc).contains(&0)
    }

    /// The long form of a short element with a nonempty tail, if its long
    /// home on `side` has a free slot. Lengthening never loses a key, and it
    /// lets short elements drain out of crowded undoubled levels.
    fn roomy_long(&self, side: usize, element: &Element) -> Option<(Element, Location)> {
        if element.tail.is_empty() || element.prefix_bits != self.geometry.prefix_bits(Width::Short) {
            return None;
        }
        let Lengthened::One(long) = element.lengthen() else { return None };
        let loc = self.geometry.locate(side, Width::Long, long.prefix)?;
        self.has_room(&loc).then_some((long, loc))
    }

    /// The location for `element` on `side`. A short element whose level on
    /// that side is doubled gives up a tail bit and becomes long; with an
    /// empty tail the second half goes to `pending`. A short element whose
    /// bucket is full also turns long when that finds it a free slot.
    fn home_on(&mut self, side: usize, element: Element, pending: &mut Vec<Element>) -> (Element, Location) {
        let width = self.geometry.width_of(element.prefix_bits).expect("normalized element");
        if let Some(loc) = self.geometry.locate(side, width, element.prefix) {
            if !self.has_room(&loc) {
                if let Some(escape) = self.roomy_long(side, &element) {
                    return escape;
                }
            }
            return (element, loc);
        }
        let long = match element.lengthen() {
            Lengthened::One(e) => e,
            Lengthened::Two([e, twin]) => {
                self.occupied += 1;
                pending.push(twin);
                e
            }
        };
        let loc = self.geometry.locate(side, Width::Long, long.prefix).expect("long permutation always lands");
        (long, loc)
    }

    /// A slot whose occupant has room at its other home, else a random one.
    fn pick_victim(&mut self, loc: &Location) -> usize {
        let other = loc.side ^ 1;
        for (j, &raw) in self.bucket(loc).iter().enumerate() {
            let (long_fingerprint, fingerprint, tail) = decode_slot(raw).expect("full bucket");
            let (prefix_bits, prefix) =
                self.geometry.reconstruct(loc.level, loc.side, loc.bucket, long_fingerprint, fingerprint);
            let victim = Element { prefix_bits, prefix, tail };
            let width = self.geometry.width_of(prefix_bits).expect("stored element");
            let roomy = match self.geometry.locate(other, width, prefix) {
                Some(home) => self.has_room(&home) || self.roomy_long(other, &victim).is_some(),
                None => match victim.lengthen() {
                    Lengthened::One(e) => self
                        .geometry
                        .locate(other, Width::Long, e.prefix)
                        .is_some_and(|h| self.has_room(&h)),
                    Lengthened::Two(_) => false,
                },
            };
            if roomy {
                return j;
            }
        }
        self.kicks.below(BUCKET_SLOTS as u64) as usize
    }

    /// Runs an eviction chain starting by forcing `element` into `loc`.
    fn kick_chain(&mut self, mut loc: Location, mut element: Element, pending: &mut Vec<Element>) -> Option<Element> {
        for _ in 0..MAX_KICKS {
            let base = self.geometry.slot_index(loc.level, loc.side, loc.bucket);
            let index = base + self.pick_victim(&loc);
            let raw = encode_slot(loc.long_fingerprint, loc.fingerprint, element.tail);
            let victim = std::mem::replace(&mut self.levels[loc.level][index], raw);
            let (long_fingerprint, fingerprint, tail) = decode_slot(victim).expect("full bucket");
            let (prefix_bits, prefix) =
                self.geometry.reconstruct(loc.level, loc.side, loc.bucket, long_fingerprint, fingerprint);
            let victim = Element { prefix_bits, prefix, tail };
            let (moved, next) = self.home_on(loc.side ^ 1, victim, pending);
            if self.try_place(&next, moved.tail) {
                return None;
            }
            element = moved;
            loc = next;
        }
        Some(element)
    }

    /// Inserts an element already at short or long width.
    fn place(&mut self, element: Element, pending: &mut Vec<Element>) -> Option<Element> {
        let width = self.geometry.width_of(element.prefix_bits).expect("normalized element");
        let mut homes: Vec<Location> = (0..2)
            .filter_map(|side| self.geometry.locate(side, width, element.prefix))
            .collect();
        let mut element = element;
        if homes.is_empty() {
            // short element whose levels are both doubled
            let (long, loc) = self.home_on(0, element, pending);
            element = long;
            homes = vec![loc];
            homes.extend(self.geometry.locate(1, Width::Long, long.prefix));
        }
        for loc in &homes {
            if self.try_place(loc, element.tail) {
                return None;
            }
        }
        for side in 0..2 {
            if let Some((long, loc)) = self.roomy_long(side, &element) {
                self.try_place(&loc, long.tail);
                return None;
            }
        }
        let start = homes[self.kicks.below(homes.len() as u64) as usize];
        self.kick_chain(start, element, pending)
    }

    /// Places each element (and any duplicates spawned on the way), sending
    /// leftovers to the stash.
    fn place_all(&mut self, mut work: Vec<Element>) {
        while let Some(e) = work.pop() {
            if let Some(homeless) = self.place(e, &mut work) {
                self.stash.push(homeless);
            }
        }
    }

    /// New keys go to the emptiest of their candidate buckets, which steers
    /// them towards the roomier doubled levels.
    fn insert_key(&mut self, digest: u64) {
        let candidates = self.geometry.candidates(digest);
        let widths = [Width::Long, Width::Long, Width::Short, Width::Short];
        let mut best: Option<(usize, usize)> = None;
        for (i, candidate) in candidates.iter().enumerate() {
            if let Some((loc, _)) = candidate {
                let used = self.bucket(loc).iter().filter(|&&w| w != 0).count();
                if best.is_none_or(|(_, b)| used < b) {
                    best = Some((i, used));
                }
            }
        }
        let (i, used) = best.expect("long candidates always exist");
        if used < BUCKET_SLOTS {
            let (loc, key_tail) = candidates[i].unwrap();
            self.try_place(&loc, Tail::new(TAIL_BITS, key_tail).expect("key tail fits"));
            return;
        }
        let valid: Vec<(Location, Width)> = candidates
            .iter()
            .zip(widths)
            .filter_map(|(c, w)| c.map(|(loc, _)| (loc, w)))
            .collect();
        let (loc, width) = valid[self.kicks.below(valid.len() as u64) as usize];
        let element = Element::of_key(digest, self.geometry.prefix_bits(width));
        let mut pending = Vec::new();
        if let Some(homeless) = self.kick_chain(loc, element, &mut pending) {
            self.stash.push(homeless);
        }
        self.place_all(pending);
    }

    fn over_limits(&self) -> bool {
        self.occupied * 10 > self.capacity_slots() * MAX_LOAD_TENTHS || self.stash.len() > MAX_STASH
    }

    /// Doubles the level at the cursor and advances the cursor, wrapping to
    /// zero (and growing `a`) after the last level. The stash is retried
    /// afterwards.
    pub fn upsize(&mut self) -> Result<()> {
        let g = &self.geometry;
        if g.cursor + 1 == LEVELS {
            check_log_buckets(g.log_buckets + 1)?;
        }
        let level = g.cursor;
        let old_per_side = BUCKET_SLOTS << g.log_buckets;
        let old = std::mem::take(&mut self.levels[level]);
        let mut moved = Vec::new();
        let mut grown = vec![0u16; 2 * 2 * old_per_side];
        for (i, &raw) in old.iter().enumerate() {
            let Some((long_fingerprint, fingerprint, tail)) = decode_slot(raw) else { continue };
            let (side, bucket) = (i / old_per_side, (i % old_per_side) / BUCKET_SLOTS);
            if long_fingerprint {
                // the top fingerprint bit becomes the low address bit
                let short_bits = FINGERPRINT_BITS - 1;
                let new_bucket = (bucket << 1) | (fingerprint >> short_bits) as usize;
                let base = ((side * 2 * old_per_side / BUCKET_SLOTS) + new_bucket) * BUCKET_SLOTS;
                let slot = grown[base..base + BUCKET_SLOTS]
                    .iter_mut()
                    .find(|w| **w == 0)
                    .expect("split bucket has room");
                *slot = encode_slot(false, fingerprint & low_mask(short_bits), tail);
            } else {
                let (prefix_bits, prefix) = g.reconstruct(level, side, bucket, false, fingerprint);
                moved.push(Element { prefix_bits, prefix, tail });
            }
        }
        self.levels[level] = grown;
        let wrapped = self.geometry.advance()?;
        self.upsizes += 1;

        // Short elements of the doubled level lose their home there. Spending
        // a tail bit makes them long, so they can also use doubled levels;
        // empty tails stay short rather than duplicating the whole level.
        let mut work = Vec::with_capacity(moved.len() + self.stash.len());
        for e in moved {
            match e.lengthen() {
                Lengthened::One(long) if !wrapped => work.push(long),
                _ => self.normalize(e, &mut work),
            }
        }
        for e in std::mem::take(&mut self.stash) {
            self.normalize(e, &mut work);
        }
        self.place_all(work);
        Ok(())
    }

    pub fn freeze(&self) -> FrozenMtcf {
        let levels = self
            .levels
            .iter()
            .map(|slots| {
                let mut codes = PackedArray::new(FROZEN_CODE_BITS, slots.len());
                for (i, &raw) in slots.iter().enumerate() {
                    if let Some((long, fp, _)) = decode_slot(raw) {
                        codes.set(i, frozen_code(long, fp));
                    }
                }
                codes
            })
            .collect();
        FrozenMtcf {
            seed: self.seed,
            hasher: self.hasher,
            geometry: self.geometry.clone(),
            levels,
            stash: self.stash.iter().map(|e| (e.prefix_bits, e.prefix)).collect(),
        }
    }

    #[cfg(test)]
    fn recount(&self) -> usize {
        self.levels.iter().flatten().filter(|&&w| w != 0).count() + self.stash.len()
    }
}

impl Membership for Mtcf {
    fn hasher(&self) -> HashFunction64 {
        self.hasher
    }

    fn contains_digest(&self, digest: u64) -> bool {
        for (loc, key_tail) in self.geometry.candidates(digest).into_iter().flatten() {
            for &raw in self.bucket(&loc) {
                if let Some((long, fp, tail)) = decode_slot(raw) {
                    if long == loc.long_fingerprint && fp == loc.fingerprint && tail.is_prefix_of(key_tail) {
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

impl GrowableFilter for Mtcf {
    fn insert_digest(&mut self, digest: u64) -> Result<()> {
        // A key that already matches stays matched through every upsize, and
        // storing copies of one key would exhaust its buckets.
        if self.contains_digest(digest) {
            return Ok(());
        }
        self.occupied += 1;
        self.insert_key(digest);
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

/// Frozen slot code: `long_flag << 10 | fingerprint << 1 | occupied`.
pub const FROZEN_CODE_BITS: u32 = FINGERPRINT_BITS + 2;

#[inline]
fn frozen_code(long_fingerprint: bool, fingerprint: u64) -> u64 {
    ((long_fingerprint as u64) << (FINGERPRINT_BITS + 1)) | (fingerprint << 1) | 1
}

/// A read-only minimal taffy cuckoo filter without tails.
#[derive(Clone, Debug)]
pub struct FrozenMtcf {
    seed: u64,
    hasher: HashFunction64,
    geometry: Geometry,
    levels: Vec<PackedArray>,
    /// (prefix width, prefix) pairs.
    stash: Vec<(u32, u64)>,
}

impl FrozenMtcf {
    pub(crate) fn from_parts(
        seed: u64,
        log_buckets: u32,
        cursor: usize,
        levels: Vec<PackedArray>,
        stash: Vec<(u32, u64)>,
    ) -> Result<Self> {
        let derived = Derived::new(seed);
        let geometry = Geometry::new(derived.keys, log_buckets, cursor)?;
        if levels.len() != LEVELS
            || levels
                .iter()
                .enumerate()
                .any(|(l, c)| c.len() != geometry.level_slots(l) || c.width() != FROZEN_CODE_BITS)
        {
            return Err(Error::Malformed("frozen level sizes do not match cursor".into()));
        }
        if stash
            .iter()
            .any(|&(bits, p)| bits > geometry.prefix_bits(Width::Long) || p & !low_mask(bits) != 0)
        {
            return Err(Error::Malformed("frozen stash prefix too wide".into()));
        }
        Ok(Self {
            seed,
            hasher: derived.hasher,
            geometry,
            levels,
            stash,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn log_buckets(&self) -> u32 {
        self.geometry.log_buckets
    }

    pub fn cursor(&self) -> usize {
        self.geometry.cursor
    }

    pub fn levels(&self) -> &[PackedArray] {
        &self.levels
    }

    pub fn stash(&self) -> &[(u32, u64)] {
        &self.stash
    }

    pub fn thaw(&self) -> Mtcf {
        let levels = self
            .levels
            .iter()
            .map(|codes| {
                (0..codes.len())
                    .map(|i| {
                        let code = codes.get(i);
                        if code & 1 == 0 {
                            return 0;
                        }
                        let long = code >> (FINGERPRINT_BITS + 1) == 1;
                        encode_slot(long, (code >> 1) & low_mask(FINGERPRINT_BITS), Tail::EMPTY)
                    })
                    .collect()
            })
            .collect();
        let stash = self
            .stash
            .iter()
            .map(|&(prefix_bits, prefix)| Element { prefix_bits, prefix, tail: Tail::EMPTY })
            .collect();
        let kicks = Derived::new(self.seed).kicks.state();
        Mtcf::from_parts(self.seed, self.geometry.log_buckets, self.geometry.cursor, levels, stash, kicks)
            .expect("frozen layout matches a thawed filter")
    }
}

impl Membership for FrozenMtcf {
    fn hasher(&self) -> HashFunction64 {
        self.hasher
    }

    fn contains_digest(&self, digest: u64) -> bool {
        for (loc, _) in self.geometry.candidates(digest).into_iter().flatten() {
            let want = frozen_code(loc.long_fingerprint, loc.fingerprint);
            let base = self.geometry.slot_index(loc.level, loc.side, loc.bucket);
            let codes = &self.levels[loc.level];
            if (base..base + BUCKET_SLOTS).any(|i| codes.get(i) == want) {
                return true;
            }
        }
        self.stash
            .iter()
            .any(|&(bits, prefix)| key_prefix(digest, bits) == prefix)
    }

    fn allocated_bytes(&self) -> usize {
        self.levels.iter().map(PackedArray::bytes).sum()
    }
}
