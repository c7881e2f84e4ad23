//! Right-aligned bit strings of at most 64 bits.
//!
//! Every variable-width field of a secured data field (payload, truncated
//! freshness value, truncated MAC) fits in one `u64`, so a bit string is
//! just a value plus a width. Bit 0 of the string is the most significant
//! of the `len` low bits of `value`.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum BitsError {
    #[error("bit string length {0} exceeds 64")]
    TooLong(u32),
    #[error("value does not fit in {len} bits")]
    ValueTooWide { len: u32 },
    #[error("expected {expected} bytes for a {len}-bit string, got {got}")]
    ByteLength {
        len: u32,
        expected: usize,
        got: usize,
    },
    #[error("padding bits after bit {len} are not zero")]
    NonZeroPadding { len: u32 },
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct BitString {
    value: u64,
    len: u32,
}

#[inline]
fn mask(len: u32) -> u64 {
    if len >= 64 {
        u64::MAX
    } else {
        (1u64 << len) - 1
    }
}

impl BitString {
    pub const fn empty() -> Self {
        BitString { value: 0, len: 0 }
    }

    pub fn new(value: u64, len: u32) -> Result<Self, BitsError> {
        if len > 64 {
            return Err(BitsError::TooLong(len));
        }
        if value & !mask(len) != 0 {
            return Err(BitsError::ValueTooWide { len });
        }
        Ok(BitString { value, len })
    }

    /// Keeps the `len` low bits of `value`.
    pub fn low_bits(value: u64, len: u32) -> Result<Self, BitsError> {
        if len > 64 {
            return Err(BitsError::TooLong(len));
        }
        Ok(BitString {
            value: value & mask(len),
            len,
        })
    }

    /// Reads `len` bits MSB-first from `bytes`, which must be exactly
    /// `ceil(len / 8)` long with zero trailing padding.
    pub fn from_bytes(bytes: &[u8], len: u32) -> Result<Self, BitsError> {
        if len > 64 {
            return Err(BitsError::TooLong(len));
        }
        let expected = len.div_ceil(8) as usize;
        if bytes.len() != expected {
            return Err(BitsError::ByteLength {
                len,
                expected,
                got: bytes.len(),
            });
        }
        let mut acc: u64 = 0;
        for &b in bytes {
            acc = (acc << 8) | u64::from(b);
        }
        let pad = expected as u32 * 8 - len;
        if acc & mask(pad) != 0 {
            return Err(BitsError::NonZeroPadding { len });
        }
        Ok(BitString {
            value: if pad == 64 { 0 } else { acc >> pad },
            len,
        })
    }

    /// MSB-first bytes, zero padded at the end to a whole byte.
    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.len.div_ceil(8);
        let pad = n * 8 - self.len;
        let v = if self.len == 0 { 0 } else { self.value << pad };
        (0..n).rev().map(|i| (v >> (8 * i)) as u8).collect()
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn len(&self) -> u32 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// `self ‖ other`.
    pub fn concat(&self, other: &BitString) -> Result<BitString, BitsError> {
        let len = self.len + other.len;
        if len > 64 {
            return Err(BitsError::TooLong(len));
        }
        let hi = if other.len == 64 {
            0
        } else {
            self.value << other.len
        };
        Ok(BitString {
            value: hi | other.value,
            len,
        })
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({:#x}/{})", self.value, self.len)
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode_upper(self.to_bytes()))
    }
}
