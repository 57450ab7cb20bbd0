//! MSB-first bit I/O and exponential-Golomb codes.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BitsError {
    #[error("bitstream ended prematurely at bit {pos}")]
    UnexpectedEnd { pos: usize },
    #[error("malformed exp-golomb prefix at bit {pos}")]
    BadPrefix { pos: usize },
}

/// Accumulates bits most-significant first.
#[derive(Debug, Default, Clone)]
pub struct BitWriter {
    bytes: Vec<u8>,
    bit_len: usize,
}

impl BitWriter {
    pub fn new() -> BitWriter {
        BitWriter::default()
    }

    #[inline]
    pub fn write_bit(&mut self, bit: bool) {
        if self.bit_len.is_multiple_of(8) {
            self.bytes.push(0);
        }
        if bit {
            let idx = self.bit_len / 8;
            self.bytes[idx] |= 0x80 >> (self.bit_len % 8);
        }
        self.bit_len += 1;
    }

    /// Writes the low `count` bits of `value`, most significant first.
    pub fn write_bits(&mut self, value: u32, count: usize) {
        debug_assert!(count <= 32);
        for i in (0..count).rev() {
            self.write_bit(value >> i & 1 == 1);
        }
    }

    /// Unsigned exp-Golomb: `n` leading zeros followed by `value + 1` in
    /// `n + 1` bits.
    pub fn write_ue(&mut self, value: u32) {
        let v = u64::from(value) + 1;
        let bits = 64 - v.leading_zeros() as usize;
        for _ in 0..bits - 1 {
            self.write_bit(false);
        }
        for i in (0..bits).rev() {
            self.write_bit(v >> i & 1 == 1);
        }
    }

    /// Signed exp-Golomb: positive `v` maps to `2v - 1`, non-positive to
    /// `-2v`.
    pub fn write_se(&mut self, value: i32) {
        let mapped = if value > 0 {
            2 * value as u32 - 1
        } else {
            2 * value.unsigned_abs()
        };
        self.write_ue(mapped);
    }

    pub fn bit_len(&self) -> usize {
        self.bit_len
    }

    /// Finishes the stream, padding the final byte with zero bits.
    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }
}

/// Reads bits most-significant first.
#[derive(Debug)]
pub struct BitReader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(data: &'a [u8]) -> BitReader<'a> {
        BitReader { data, pos: 0 }
    }

    #[inline]
    pub fn read_bit(&mut self) -> Result<bool, BitsError> {
        let idx = self.pos / 8;
        if idx >= self.data.len() {
            return Err(BitsError::UnexpectedEnd { pos: self.pos });
        }
        let bit = self.data[idx] & (0x80 >> (self.pos % 8)) != 0;
        self.pos += 1;
        Ok(bit)
    }

    pub fn read_bits(&mut self, count: usize) -> Result<u32, BitsError> {
        debug_assert!(count <= 32);
        let mut v = 0u32;
        for _ in 0..count {
            v = v << 1 | u32::from(self.read_bit()?);
        }
        Ok(v)
    }

    pub fn read_ue(&mut self) -> Result<u32, BitsError> {
        let start = self.pos;
        let mut zeros = 0usize;
        while !self.read_bit()? {
            zeros += 1;
            if zeros > 32 {
                return Err(BitsError::BadPrefix { pos: start });
            }
        }
        let mut v: u64 = 1;
        for _ in 0..zeros {
            v = v << 1 | u64::from(self.read_bit()?);
        }
        Ok((v - 1) as u32)
    }

    pub fn read_se(&mut self) -> Result<i32, BitsError> {
        let ue = self.read_ue()?;
        Ok(if ue % 2 == 1 {
            (ue / 2 + 1) as i32
        } else {
            -((ue / 2) as i32)
        })
    }

    pub fn bit_pos(&self) -> usize {
        self.pos
    }
}
