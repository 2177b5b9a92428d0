//! Fixed-width integer array packed into 64-bit words.

use crate::error::{Error, Result};
use crate::hash::low_mask;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PackedArray {
    width: u32,
    len: usize,
    words: Vec<u64>,
}

impl PackedArray {
    pub fn new(width: u32, len: usize) -> Self {
        assert!((1..=32).contains(&width));
        Self {
            width,
            len,
            words: vec![0; words_for(width, len)],
        }
    }

    pub fn from_words(width: u32, len: usize, words: Vec<u64>) -> Result<Self> {
        if !(1..=32).contains(&width) || words.len() != words_for(width, len) {
            return Err(Error::Malformed(format!(
                "{} words cannot hold {len} values of {width} bits",
                words.len()
            )));
        }
        Ok(Self { width, len, words })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn bytes(&self) -> usize {
        self.words.len() * 8
    }

    #[inline]
    pub fn get(&self, index: usize) -> u64 {
        debug_assert!(index < self.len);
        let bit = index * self.width as usize;
        let (word, offset) = (bit / 64, (bit % 64) as u32);
        let mut value = self.words[word] >> offset;
        if offset + self.width > 64 {
            value |= self.words[word + 1] << (64 - offset);
        }
        value & low_mask(self.width)
    }

    #[inline]
    pub fn set(&mut self, index: usize, value: u64) {
        debug_assert!(index < self.len && value >> self.width == 0);
        let bit = index * self.width as usize;
        let (word, offset) = (bit / 64, (bit % 64) as u32);
        let mask = low_mask(self.width);
        self.words[word] = (self.words[word] & !(mask << offset)) | (value << offset);
        if offset + self.width > 64 {
            let spill = 64 - offset;
            self.words[word + 1] = (self.words[word + 1] & !(mask >> spill)) | (value >> spill);
        }
    }
}

fn words_for(width: u32, len: usize) -> usize {
    (len * width as usize).div_ceil(64)
}
