//! Tails, quotiented elements and the 16-bit slot encoding.
//!
//! A tail of length `len <= T` is stored in a `T + 1` bit tail-code of the
//! form `0^(T-len) 1 tail`. An all-zero tail-code marks an empty slot, which
//! is distinct from an element whose tail has length zero (`0^T 1`).

use crate::error::{Error, Result};
use crate::hash::low_mask;

/// Maximum tail length used by both cuckoo filters.
pub const TAIL_BITS: u32 = 5;

/// Unpermuted key bits stored next to a fingerprint. The first tail bit is
/// the most significant of the `len` low bits of `bits`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Tail {
    len: u8,
    bits: u8,
}

impl Tail {
    pub const EMPTY: Tail = Tail { len: 0, bits: 0 };

    pub fn new(len: u32, bits: u64) -> Result<Self> {
        if len > TAIL_BITS {
            return Err(Error::Malformed(format!("tail of {len} bits exceeds {TAIL_BITS}")));
        }
        if bits >> len != 0 {
            return Err(Error::Malformed(format!("tail value {bits:#x} wider than {len} bits")));
        }
        Ok(Self {
            len: len as u8,
            bits: bits as u8,
        })
    }

    /// The full-length tail of a key: the `TAIL_BITS` digest bits that
    /// follow its first `prefix_bits` bits.
    #[inline]
    pub fn of_key(digest: u64, prefix_bits: u32) -> Self {
        Self {
            len: TAIL_BITS as u8,
            bits: key_tail(digest, prefix_bits) as u8,
        }
    }

    #[inline]
    pub fn len(&self) -> u32 {
        self.len as u32
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn bits(&self) -> u64 {
        self.bits as u64
    }

    /// Whether this tail is a prefix of a full `TAIL_BITS`-bit key tail.
    #[inline]
    pub fn is_prefix_of(&self, key_tail: u64) -> bool {
        key_tail >> (TAIL_BITS - self.len()) == self.bits()
    }

    /// Removes the first bit, returning it with the shortened tail.
    #[inline]
    pub fn steal(&self) -> Option<(u64, Tail)> {
        if self.len == 0 {
            return None;
        }
        let rest = self.len - 1;
        Some((
            (self.bits >> rest) as u64 & 1,
            Tail {
                len: rest,
                bits: self.bits & ((1u8 << rest) - 1),
            },
        ))
    }

    /// Prepends `bit` to the tail (the inverse of [`Tail::steal`]).
    pub fn push_front(&self, bit: u64) -> Option<Tail> {
        if self.len() >= TAIL_BITS {
            return None;
        }
        Some(Tail {
            len: self.len + 1,
            bits: ((bit as u8 & 1) << self.len) | self.bits,
        })
    }

    #[inline]
    pub fn code(&self) -> u16 {
        (1u16 << self.len) | self.bits as u16
    }

    /// Decodes a `TAIL_BITS + 1` bit tail-code; `None` means empty slot.
    #[inline]
    pub fn from_code(code: u16) -> Option<Tail> {
        debug_assert!(code >> (TAIL_BITS + 1) == 0);
        if code == 0 {
            return None;
        }
        let len = 15 - code.leading_zeros() as u8;
        Some(Tail {
            len,
            bits: (code & ((1u16 << len) - 1)) as u8,
        })
    }
}

impl std::fmt::Display for Tail {
    /// Renders the tail as a bit string, first bit leftmost.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for i in (0..self.len).rev() {
            write!(f, "{}", (self.bits >> i) & 1)?;
        }
        Ok(())
    }
}

/// The first `bits` bits of a digest.
#[inline]
pub fn key_prefix(digest: u64, bits: u32) -> u64 {
    if bits == 0 {
        0
    } else {
        digest >> (64 - bits)
    }
}

/// The `TAIL_BITS` digest bits after the first `prefix_bits`.
#[inline]
pub fn key_tail(digest: u64, prefix_bits: u32) -> u64 {
    debug_assert!(prefix_bits + TAIL_BITS <= 64);
    (digest << prefix_bits) >> (64 - TAIL_BITS)
}

/// A key fragment that may sit in a slot or stash: the first `prefix_bits`
/// bits of the hashed key plus the tail that follows them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Element {
    pub prefix_bits: u32,
    pub prefix: u64,
    pub tail: Tail,
}

impl Element {
    pub fn of_key(digest: u64, prefix_bits: u32) -> Self {
        Self {
            prefix_bits,
            prefix: key_prefix(digest, prefix_bits),
            tail: Tail::of_key(digest, prefix_bits),
        }
    }

    /// Whether every key this element stands for would match `digest`.
    #[inline]
    pub fn matches(&self, digest: u64) -> bool {
        key_prefix(digest, self.prefix_bits) == self.prefix
            && self.tail.is_prefix_of(key_tail(digest, self.prefix_bits))
    }

    /// Moves one tail bit onto the end of the prefix. With an empty tail the
    /// missing bit is unknown, so both continuations are returned.
    pub fn lengthen(&self) -> Lengthened {
        let prefix_bits = self.prefix_bits + 1;
        match self.tail.steal() {
            Some((bit, tail)) => Lengthened::One(Element {
                prefix_bits,
                prefix: (self.prefix << 1) | bit,
                tail,
            }),
            None => Lengthened::Two([0, 1].map(|bit| Element {
                prefix_bits,
                prefix: (self.prefix << 1) | bit,
                tail: Tail::EMPTY,
            })),
        }
    }

    /// Lengthens until the prefix has `target` bits.
    pub fn lengthen_to(&self, target: u32) -> Vec<Element> {
        let mut out = vec![*self];
        while out[0].prefix_bits < target {
            out = out
                .iter()
                .flat_map(|e| match e.lengthen() {
                    Lengthened::One(x) => vec![x],
                    Lengthened::Two(xs) => xs.to_vec(),
                })
                .collect();
        }
        out
    }

    pub(crate) fn check(&self) -> Result<()> {
        if self.prefix_bits > 64 - TAIL_BITS || (self.prefix & !low_mask(self.prefix_bits)) != 0 {
            return Err(Error::Malformed(format!(
                "element prefix {:#x} does not fit {} bits",
                self.prefix, self.prefix_bits
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Lengthened {
    One(Element),
    Two([Element; 2]),
}

/// Slot word of a filter with `fingerprint_bits`-bit fingerprints:
/// fingerprint in the high bits, tail-code in the low `TAIL_BITS + 1`.
#[inline]
pub fn encode_slot(fingerprint: u64, tail: Tail) -> u16 {
    ((fingerprint as u16) << (TAIL_BITS + 1)) | tail.code()
}

#[inline]
pub fn decode_slot(raw: u16) -> Option<(u64, Tail)> {
    let tail = Tail::from_code(raw & TAIL_CODE_MASK)?;
    Some(((raw >> (TAIL_BITS + 1)) as u64, tail))
}

pub const TAIL_CODE_MASK: u16 = (1 << (TAIL_BITS + 1)) - 1;

#[inline]
pub fn slot_is_empty(raw: u16) -> bool {
    raw & TAIL_CODE_MASK == 0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tail(s: &str) -> Tail {
        Tail::new(s.len() as u32, u64::from_str_radix(if s.is_empty() { "0" } else { s }, 2).unwrap()).unwrap()
    }

    #[test]
    fn documented_tail_codes() {
        assert_eq!(tail("0000").code(), 0b010000);
        assert_eq!(Tail::from_code(0b010000), Some(tail("0000")));
        assert_eq!(Tail::EMPTY.code(), 0b000001);
        assert_eq!(Tail::from_code(0b000001), Some(Tail::EMPTY));
        assert_eq!(Tail::from_code(0), None);
        assert!(slot_is_empty(encode_slot(0x3ff, Tail::EMPTY) & !TAIL_CODE_MASK));
        assert!(!slot_is_empty(encode_slot(0, Tail::EMPTY)));
    }

    #[test]
    fn tail_rendering() {
        assert_eq!(tail("101").to_string(), "101");
        assert_eq!(tail("0000").to_string(), "0000");
        assert_eq!(Tail::EMPTY.to_string(), "");
    }

    #[test]
    fn oversize_tail_rejected() {
        assert!(Tail::new(6, 0).is_err());
        assert!(Tail::new(2, 0b100).is_err());
    }

    #[test]
    fn every_slot_word_decodes_consistently() {
        let mut empties = 0;
        for raw in 0..=u16::MAX {
            match decode_slot(raw) {
                None => {
                    assert!(slot_is_empty(raw));
                    empties += 1;
                }
                Some((fp, t)) => {
                    assert!(fp < 1 << 10);
                    assert!(t.len() <= TAIL_BITS);
                    assert_eq!(encode_slot(fp, t), raw);
                }
            }
        }
        assert_eq!(empties, 1 << 10);
    }

    #[test]
    fn prefix_matching() {
        let key = 0b10110;
        assert!(Tail::EMPTY.is_prefix_of(key));
        assert!(tail("1").is_prefix_of(key));
        assert!(tail("1011").is_prefix_of(key));
        assert!(tail("10110").is_prefix_of(key));
        assert!(!tail("11").is_prefix_of(key));
        assert!(!tail("10111").is_prefix_of(key));
    }

    #[test]
    fn stealing_takes_the_first_bit() {
        let e = Element { prefix_bits: 10, prefix: 0x2aa, tail: tail("101") };
        match e.lengthen() {
            Lengthened::One(x) => {
                assert_eq!(x.prefix, (0x2aa << 1) | 1);
                assert_eq!(x.prefix_bits, 11);
                assert_eq!(x.tail, tail("01"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_tail_duplicates() {
        let e = Element { prefix_bits: 10, prefix: 0x155, tail: Tail::EMPTY };
        match e.lengthen() {
            Lengthened::Two([a, b]) => {
                assert_eq!((a.prefix, a.tail), (0x155 << 1, Tail::EMPTY));
                assert_eq!((b.prefix, b.tail), ((0x155 << 1) | 1, Tail::EMPTY));
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(e.lengthen_to(12).len(), 4);
    }

    proptest! {
        #[test]
        fn slot_round_trip(fp in 0u64..1024, len in 0u32..=5, bits: u64) {
            let t = Tail::new(len, bits & low_mask(len)).unwrap();
            let raw = encode_slot(fp, t);
            prop_assert!(!slot_is_empty(raw));
            prop_assert_eq!(decode_slot(raw), Some((fp, t)));
        }

        #[test]
        fn lengthening_preserves_matches(digest: u64, prefix_bits in 4u32..40, drop in 0u32..=5) {
            // A shortened tail of the key's own element still matches the key.
            let mut e = Element::of_key(digest, prefix_bits);
            e.tail = Tail::new(e.tail.len() - drop, e.tail.bits() >> drop).unwrap();
            prop_assert!(e.matches(digest));
            for x in e.lengthen_to(prefix_bits + 3) {
                if key_prefix(digest, x.prefix_bits) == x.prefix {
                    prop_assert!(x.matches(digest));
                }
            }
            prop_assert!(e.lengthen_to(prefix_bits + 3).iter().any(|x| x.matches(digest)));
        }

        #[test]
        fn push_front_undoes_steal(len in 1u32..=5, bits: u64) {
            let t = Tail::new(len, bits & low_mask(len)).unwrap();
            let (bit, rest) = t.steal().unwrap();
            prop_assert_eq!(rest.push_front(bit), Some(t));
        }
    }
}
