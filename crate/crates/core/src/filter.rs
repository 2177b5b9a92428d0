use crate::error::Result;
use crate::hash::HashFunction64;

/// Read side of an approximate membership filter.
///
/// All filters work on 64-bit digests. The `*_key` helpers hash with the
/// filter's own [`HashFunction64`], fixed at construction from its seed.
pub trait Membership {
    fn hasher(&self) -> HashFunction64;

    fn contains_digest(&self, digest: u64) -> bool;

    /// Bytes of slot or block storage currently allocated.
    fn allocated_bytes(&self) -> usize;

    fn contains_key(&self, key: &[u8]) -> bool {
        self.contains_digest(self.hasher().hash(key))
    }

    fn contains_u64(&self, key: u64) -> bool {
        self.contains_digest(self.hasher().hash_u64(key))
    }
}

/// A filter that accepts inserts and grows as needed.
pub trait GrowableFilter: Membership {
    fn insert_digest(&mut self, digest: u64) -> Result<()>;

    fn insert_key(&mut self, key: &[u8]) -> Result<()> {
        let digest = self.hasher().hash(key);
        self.insert_digest(digest)
    }

    fn insert_u64(&mut self, key: u64) -> Result<()> {
        let digest = self.hasher().hash_u64(key);
        self.insert_digest(digest)
    }
}

impl<F: Membership + ?Sized> Membership for &F {
    fn hasher(&self) -> HashFunction64 {
        (**self).hasher()
    }
    fn contains_digest(&self, digest: u64) -> bool {
        (**self).contains_digest(digest)
    }
    fn allocated_bytes(&self) -> usize {
        (**self).allocated_bytes()
    }
}
