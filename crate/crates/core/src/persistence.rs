//! Versioned binary file format for every filter type.
//!
//! ```text
//! "TAFY" | version u8 | type tag u8 | seed u64 | params | payload | xxh64 u64
//! ```
//!
//! All integers are little-endian. The trailing checksum is XXH64 (seed 0)
//! over every preceding byte. Permutation keys and hash seeds are not stored;
//! they are re-derived from the seed on load.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::filter::Membership;
use crate::hash::HashFunction64;
use crate::mtcf::{self, FrozenMtcf, Mtcf};
use crate::packed::PackedArray;
use crate::sbbf::{Block, Sbbf, LANES};
use crate::slot::{Element, Tail, TAIL_BITS};
use crate::tbf::{level_params, Tbf};
use crate::tcf::{self, FrozenTcf, Tcf};

pub const MAGIC: [u8; 4] = *b"TAFY";
pub const VERSION: u8 = 1;
const HEADER_BYTES: usize = 4 + 1 + 1 + 8;
const CHECKSUM_BYTES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum TypeTag {
    Tbf = 1,
    Tcf = 2,
    Mtcf = 3,
    FrozenTcf = 4,
    FrozenMtcf = 5,
}

impl TypeTag {
    pub fn from_byte(byte: u8) -> Result<Self> {
        Ok(match byte {
            1 => Self::Tbf,
            2 => Self::Tcf,
            3 => Self::Mtcf,
            4 => Self::FrozenTcf,
            5 => Self::FrozenMtcf,
            other => return Err(Error::UnknownType(other)),
        })
    }
}

/// Any filter the file format can hold.
#[derive(Clone, Debug)]
pub enum AnyFilter {
    Tbf(Tbf),
    Tcf(Tcf),
    Mtcf(Mtcf),
    FrozenTcf(FrozenTcf),
    FrozenMtcf(FrozenMtcf),
}

impl AnyFilter {
    pub fn type_tag(&self) -> TypeTag {
        match self {
            Self::Tbf(_) => TypeTag::Tbf,
            Self::Tcf(_) => TypeTag::Tcf,
            Self::Mtcf(_) => TypeTag::Mtcf,
            Self::FrozenTcf(_) => TypeTag::FrozenTcf,
            Self::FrozenMtcf(_) => TypeTag::FrozenMtcf,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            Self::Tbf(f) => f.seed(),
            Self::Tcf(f) => f.seed(),
            Self::Mtcf(f) => f.seed(),
            Self::FrozenTcf(f) => f.seed(),
            Self::FrozenMtcf(f) => f.seed(),
        }
    }

    fn as_membership(&self) -> &dyn Membership {
        match self {
            Self::Tbf(f) => f,
            Self::Tcf(f) => f,
            Self::Mtcf(f) => f,
            Self::FrozenTcf(f) => f,
            Self::FrozenMtcf(f) => f,
        }
    }
}

impl Membership for AnyFilter {
    fn hasher(&self) -> HashFunction64 {
        self.as_membership().hasher()
    }

    fn contains_digest(&self, digest: u64) -> bool {
        self.as_membership().contains_digest(digest)
    }

    fn allocated_bytes(&self) -> usize {
        self.as_membership().allocated_bytes()
    }
}

macro_rules! any_from {
    ($($variant:ident),*) => {$(
        impl From<$variant> for AnyFilter {
            fn from(f: $variant) -> Self {
                Self::$variant(f)
            }
        }
    )*};
}
any_from!(Tbf, Tcf, Mtcf, FrozenTcf, FrozenMtcf);

/// Serializes `filter` to a byte vector.
pub fn to_bytes(filter: &AnyFilter) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(filter.type_tag() as u8);
    put_u64(&mut out, filter.seed());
    match filter {
        AnyFilter::Tbf(f) => {
            out.extend_from_slice(&f.epsilon().to_le_bytes());
            put_u32(&mut out, f.level_count() as u32);
            put_u64(&mut out, f.inserts_in_current());
            for level in f.levels() {
                put_u64(&mut out, level.blocks().len() as u64);
                for block in level.blocks() {
                    for lane in block {
                        put_u32(&mut out, *lane);
                    }
                }
            }
        }
        AnyFilter::Tcf(f) => {
            out.extend_from_slice(&[tcf::FINGERPRINT_BITS as u8, TAIL_BITS as u8, tcf::BUCKET_SLOTS as u8]);
            out.push(f.log_buckets() as u8);
            put_u64(&mut out, f.kick_state());
            for side in 0..2 {
                put_slots(&mut out, f.slots(side));
            }
            put_u32(&mut out, f.stash().len() as u32);
            for e in f.stash() {
                put_u64(&mut out, e.prefix);
                put_tail(&mut out, e.tail);
            }
        }
        AnyFilter::Mtcf(f) => {
            put_mtcf_params(&mut out, f.log_buckets(), f.cursor());
            put_u64(&mut out, f.kick_state());
            for level in 0..mtcf::LEVELS {
                put_slots(&mut out, f.level_slots(level));
            }
            put_u32(&mut out, f.stash().len() as u32);
            for e in f.stash() {
                out.push(e.prefix_bits as u8);
                put_u64(&mut out, e.prefix);
                put_tail(&mut out, e.tail);
            }
        }
        AnyFilter::FrozenTcf(f) => {
            out.extend_from_slice(&[tcf::FINGERPRINT_BITS as u8, TAIL_BITS as u8, tcf::BUCKET_SLOTS as u8]);
            out.push(f.log_buckets() as u8);
            put_words(&mut out, f.codes());
            put_u32(&mut out, f.stash().len() as u32);
            for &prefix in f.stash() {
                put_u64(&mut out, prefix);
            }
        }
        AnyFilter::FrozenMtcf(f) => {
            put_mtcf_params(&mut out, f.log_buckets(), f.cursor());
            for codes in f.levels() {
                put_words(&mut out, codes);
            }
            put_u32(&mut out, f.stash().len() as u32);
            for &(bits, prefix) in f.stash() {
                out.push(bits as u8);
                put_u64(&mut out, prefix);
            }
        }
    }
    let checksum = xxhash_rust::xxh64::xxh64(&out, 0);
    put_u64(&mut out, checksum);
    out
}

pub fn save(filter: &AnyFilter, mut sink: impl Write) -> Result<()> {
    sink.write_all(&to_bytes(filter))?;
    sink.flush()?;
    Ok(())
}

pub fn load(mut source: impl Read) -> Result<AnyFilter> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    from_bytes(&bytes)
}

pub fn from_bytes(bytes: &[u8]) -> Result<AnyFilter> {
    if bytes.len() < 4 || bytes[..4] != MAGIC {
        let mut found = [0u8; 4];
        let n = bytes.len().min(4);
        found[..n].copy_from_slice(&bytes[..n]);
        return Err(Error::BadMagic(found));
    }
    if bytes.len() < HEADER_BYTES + CHECKSUM_BYTES {
        return Err(Error::Malformed(format!("file of {} bytes is truncated", bytes.len())));
    }
    if bytes[4] != VERSION {
        return Err(Error::UnsupportedVersion(bytes[4]));
    }
    let tag = TypeTag::from_byte(bytes[5])?;
    let (body, trailer) = bytes.split_at(bytes.len() - CHECKSUM_BYTES);
    let stored = u64::from_le_bytes(trailer.try_into().expect("eight bytes"));
    let computed = xxhash_rust::xxh64::xxh64(body, 0);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }

    let mut r = Reader { bytes: &body[6..] };
    let seed = r.u64()?;
    let filter = match tag {
        TypeTag::Tbf => {
            let epsilon = f64::from_le_bytes(r.take(8)?.try_into().expect("eight bytes"));
            let count = r.u32()?;
            let inserts_in_current = r.u64()?;
            if count == 0 || count > crate::tbf::MAX_LEVEL {
                return Err(Error::Malformed(format!("{count} block filter levels")));
            }
            let mut levels = Vec::with_capacity(count as usize);
            for level in 1..=count {
                let num_blocks = r.u64()?;
                let expected = level_params(epsilon, level)?.num_blocks;
                if num_blocks != expected as u64 {
                    return Err(Error::Malformed(format!("level {level} has {num_blocks} blocks, expected {expected}")));
                }
                let raw = r.take(num_blocks as usize * LANES * 4)?;
                let blocks: Vec<Block> = raw
                    .chunks_exact(LANES * 4)
                    .map(|chunk| std::array::from_fn(|i| u32::from_le_bytes(chunk[4 * i..4 * i + 4].try_into().unwrap())))
                    .collect();
                levels.push(Sbbf::from_blocks(blocks)?);
            }
            AnyFilter::Tbf(Tbf::from_parts(epsilon, seed, levels, inserts_in_current)?)
        }
        TypeTag::Tcf => {
            let log_buckets = r.tcf_params()?;
            let kicks = r.u64()?;
            let per_side = tcf::BUCKET_SLOTS << log_buckets;
            let slots = [r.slots(per_side)?, r.slots(per_side)?];
            let stash = (0..r.u32()?)
                .map(|_| {
                    let prefix = r.u64()?;
                    let tail = r.tail()?;
                    Ok(Element { prefix_bits: log_buckets + tcf::FINGERPRINT_BITS, prefix, tail })
                })
                .collect::<Result<Vec<_>>>()?;
            AnyFilter::Tcf(Tcf::from_parts(seed, log_buckets, slots, stash, kicks)?)
        }
        TypeTag::Mtcf => {
            let (log_buckets, cursor) = r.mtcf_params()?;
            let kicks = r.u64()?;
            let levels = (0..mtcf::LEVELS)
                .map(|level| r.slots(mtcf_level_slots(log_buckets, cursor, level)))
                .collect::<Result<Vec<_>>>()?;
            let stash = (0..r.u32()?)
                .map(|_| {
                    let prefix_bits = r.u8()? as u32;
                    let prefix = r.u64()?;
                    let tail = r.tail()?;
                    Ok(Element { prefix_bits, prefix, tail })
                })
                .collect::<Result<Vec<_>>>()?;
            AnyFilter::Mtcf(Mtcf::from_parts(seed, log_buckets, cursor, levels, stash, kicks)?)
        }
        TypeTag::FrozenTcf => {
            let log_buckets = r.tcf_params()?;
            let codes = r.packed(tcf::FROZEN_CODE_BITS, 2 * (tcf::BUCKET_SLOTS << log_buckets))?;
            let stash = (0..r.u32()?).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
            AnyFilter::FrozenTcf(FrozenTcf::from_parts(seed, log_buckets, codes, stash)?)
        }
        TypeTag::FrozenMtcf => {
            let (log_buckets, cursor) = r.mtcf_params()?;
            let levels = (0..mtcf::LEVELS)
                .map(|level| r.packed(mtcf::FROZEN_CODE_BITS, mtcf_level_slots(log_buckets, cursor, level)))
                .collect::<Result<Vec<_>>>()?;
            let stash = (0..r.u32()?)
                .map(|_| Ok((r.u8()? as u32, r.u64()?)))
                .collect::<Result<Vec<_>>>()?;
            AnyFilter::FrozenMtcf(FrozenMtcf::from_parts(seed, log_buckets, cursor, levels, stash)?)
        }
    };
    if !r.bytes.is_empty() {
        return Err(Error::Malformed(format!("{} trailing bytes", r.bytes.len())));
    }
    Ok(filter)
}

fn mtcf_level_slots(log_buckets: u32, cursor: usize, level: usize) -> usize {
    2 * (mtcf::BUCKET_SLOTS << (log_buckets + (level < cursor) as u32))
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_slots(out: &mut Vec<u8>, slots: &[u16]) {
    for &w in slots {
        out.extend_from_slice(&w.to_le_bytes());
    }
}

fn put_tail(out: &mut Vec<u8>, tail: Tail) {
    out.push(tail.len() as u8);
    out.push(tail.bits() as u8);
}

fn put_words(out: &mut Vec<u8>, codes: &PackedArray) {
    put_u64(out, codes.words().len() as u64);
    for &w in codes.words() {
        put_u64(out, w);
    }
}

fn put_mtcf_params(out: &mut Vec<u8>, log_buckets: u32, cursor: usize) {
    out.extend_from_slice(&[
        mtcf::FINGERPRINT_BITS as u8,
        TAIL_BITS as u8,
        mtcf::BUCKET_SLOTS as u8,
        mtcf::LOG_LEVELS as u8,
        log_buckets as u8,
        cursor as u8,
    ]);
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() < n {
            return Err(Error::Malformed("unexpected end of payload".into()));
        }
        let (head, rest) = self.bytes.split_at(n);
        self.bytes = rest;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn tail(&mut self) -> Result<Tail> {
        let len = self.u8()?;
        let bits = self.u8()?;
        Tail::new(len as u32, bits as u64)
    }

    fn slots(&mut self, count: usize) -> Result<Vec<u16>> {
        let raw = self.take(count.checked_mul(2).ok_or_else(|| Error::Malformed("slot count overflow".into()))?)?;
        Ok(raw.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect())
    }

    fn packed(&mut self, width: u32, len: usize) -> Result<PackedArray> {
        let count = self.u64()? as usize;
        let raw = self.take(count.checked_mul(8).ok_or_else(|| Error::Malformed("word count overflow".into()))?)?;
        let words = raw.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap())).collect();
        PackedArray::from_words(width, len, words)
    }

    fn expect_params(&mut self, expected: &[u8]) -> Result<()> {
        let found = self.take(expected.len())?;
        if found != expected {
            return Err(Error::Malformed(format!("parameters {found:?} differ from supported {expected:?}")));
        }
        Ok(())
    }

    fn tcf_params(&mut self) -> Result<u32> {
        self.expect_params(&[tcf::FINGERPRINT_BITS as u8, TAIL_BITS as u8, tcf::BUCKET_SLOTS as u8])?;
        let log_buckets = self.u8()? as u32;
        if log_buckets > tcf::MAX_LOG_BUCKETS {
            return Err(Error::Malformed(format!("{log_buckets} address bits")));
        }
        Ok(log_buckets)
    }

    fn mtcf_params(&mut self) -> Result<(u32, usize)> {
        self.expect_params(&[
            mtcf::FINGERPRINT_BITS as u8,
            TAIL_BITS as u8,
            mtcf::BUCKET_SLOTS as u8,
            mtcf::LOG_LEVELS as u8,
        ])?;
        let log_buckets = self.u8()? as u32;
        let cursor = self.u8()? as usize;
        if log_buckets > mtcf::MAX_LOG_BUCKETS {
            return Err(Error::Malformed(format!("{log_buckets} address bits")));
        }
        Ok((log_buckets, cursor))
    }
}
