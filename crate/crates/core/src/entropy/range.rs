//! 32-bit range coder with carry propagation (LZMA-style byte output).
//!
//! All arithmetic is integer; totals passed to the coder must not exceed
//! [`MAX_TOTAL`].

use crate::error::{Error, Result};

const TOP: u32 = 1 << 24;

/// Largest cumulative-frequency total a model may hand to the coder.
pub const MAX_TOTAL: u32 = 1 << 17;

#[derive(Debug, Clone)]
pub struct RangeEncoder {
    low: u64,
    range: u32,
    cache: u8,
    cache_size: u64,
    out: Vec<u8>,
}

impl Default for RangeEncoder {
    fn default() -> Self {
        Self::new()
    }
}

impl RangeEncoder {
    pub fn new() -> Self {
        Self {
            low: 0,
            range: u32::MAX,
            cache: 0,
            cache_size: 1,
            out: Vec::new(),
        }
    }

    /// Codes the interval `[cum, cum + freq)` of `total`.
    pub fn encode(&mut self, cum: u32, freq: u32, total: u32) {
        debug_assert!(freq > 0 && cum + freq <= total && total <= MAX_TOTAL);
        let r = self.range / total;
        self.low += u64::from(r) * u64::from(cum);
        self.range = r * freq;
        while self.range < TOP {
            self.range <<= 8;
            self.shift_low();
        }
    }

    fn shift_low(&mut self) {
        if (self.low as u32) < 0xFF00_0000 || (self.low >> 32) != 0 {
            let carry = (self.low >> 32) as u8;
            let mut byte = self.cache;
            loop {
                self.out.push(byte.wrapping_add(carry));
                byte = 0xFF;
                self.cache_size -= 1;
                if self.cache_size == 0 {
                    break;
                }
            }
            self.cache = ((self.low >> 24) & 0xFF) as u8;
        }
        self.cache_size += 1;
        self.low = (self.low & 0x00FF_FFFF) << 8;
    }

    /// Bytes the stream would occupy if finished now.
    pub fn len_estimate(&self) -> usize {
        self.out.len() + self.cache_size as usize + 4
    }

    pub fn finish(mut self) -> Vec<u8> {
        for _ in 0..5 {
            self.shift_low();
        }
        self.out
    }
}

#[derive(Debug, Clone)]
pub struct RangeDecoder<'a> {
    bytes: &'a [u8],
    pos: usize,
    range: u32,
    code: u32,
    /// Offset of the stream within the enclosing file, for diagnostics.
    base: usize,
    pending: u32,
}

impl<'a> RangeDecoder<'a> {
    pub fn new(bytes: &'a [u8]) -> Result<Self> {
        Self::with_base(bytes, 0)
    }

    pub fn with_base(bytes: &'a [u8], base: usize) -> Result<Self> {
        if bytes.len() < 5 {
            return Err(Error::corrupt(
                base + bytes.len(),
                "range coded stream shorter than 5 bytes",
            ));
        }
        if bytes[0] != 0 {
            return Err(Error::corrupt(base, "range coded stream must start with a zero byte"));
        }
        let code = u32::from_be_bytes([bytes[1], bytes[2], bytes[3], bytes[4]]);
        Ok(Self {
            bytes,
            pos: 5,
            range: u32::MAX,
            code,
            base,
            pending: 0,
        })
    }

    pub fn offset(&self) -> usize {
        self.base + self.pos
    }

    /// Position of the next symbol within `[0, total)`.
    pub fn target(&mut self, total: u32) -> Result<u32> {
        let r = self.range / total;
        self.pending = r;
        let v = self.code / r;
        if v >= total {
            return Err(Error::corrupt(
                self.offset(),
                "range underflow: code outside the coding interval",
            ));
        }
        Ok(v)
    }

    /// Removes the interval found via [`Self::target`].
    pub fn consume(&mut self, cum: u32, freq: u32) -> Result<()> {
        let r = self.pending;
        self.code -= r * cum;
        self.range = r * freq;
        while self.range < TOP {
            let Some(&b) = self.bytes.get(self.pos) else {
                return Err(Error::corrupt(self.offset(), "range coded stream truncated"));
            };
            self.pos += 1;
            self.code = (self.code << 8) | u32::from(b);
            self.range <<= 8;
        }
        Ok(())
    }

    /// Bytes not yet read.
    pub fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}
