//! Block cipher, MAC and tag handling used by the frame codec.

pub mod chaskey;
pub mod speck;

use std::fmt;

use thiserror::Error;

use crate::bits::BitString;

pub use chaskey::{chaskey_mac, Chaskey};
pub use speck::{speck_decrypt, speck_encrypt, speck_key_schedule, KeySchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum CryptoError {
    #[error("truncation length {0} bits is outside 1..=128 or not a whole number of bytes")]
    BitsOutOfRange(u32),
}

/// One 64-bit cipher block. Serialized big-endian on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Block64(pub u64);

impl Block64 {
    pub fn to_bytes(self) -> [u8; 8] {
        self.0.to_be_bytes()
    }

    pub fn from_bytes(bytes: [u8; 8]) -> Self {
        Block64(u64::from_be_bytes(bytes))
    }
}

/// 128-bit SPECK key, stored as the big-endian bytes of `l2 l1 l0 k0`.
#[derive(Clone)]
pub struct CipherKey128([u8; 16]);

impl CipherKey128 {
    pub fn from_bytes(bytes: [u8; 16]) -> Self {
        CipherKey128(bytes)
    }

    pub fn from_u128(value: u128) -> Self {
        CipherKey128(value.to_be_bytes())
    }

    pub(crate) fn as_u128(&self) -> u128 {
        u128::from_be_bytes(self.0)
    }
}

impl fmt::Debug for CipherKey128 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CipherKey128(<redacted>)")
    }
}

/// 128-bit Chaskey key in the reference byte order.
#[derive(Clone)]
pub struct MacKey128([u8; 16]);

impl MacKey128 {
    pub fn from_bytes(bytes: [u8; 16]) -> Self {
        MacKey128(bytes)
    }

    pub(crate) fn as_bytes(&self) -> &[u8; 16] {
        &self.0
    }
}

impl fmt::Debug for MacKey128 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("MacKey128(<redacted>)")
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Tag128(pub [u8; 16]);

impl Tag128 {
    pub fn as_bytes(&self) -> &[u8; 16] {
        &self.0
    }
}

impl fmt::Debug for Tag128 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tag128({})", hex::encode(self.0))
    }
}

/// The leading `bits` bits of a [`Tag128`].
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct TruncatedTag {
    bytes: [u8; 16],
    bits: u32,
}

impl TruncatedTag {
    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes[..(self.bits / 8) as usize]
    }

    /// Builds a tag from its wire bits (e.g. a received MACT).
    pub fn from_bit_string(bits: &BitString) -> Result<Self, CryptoError> {
        let len = bits.len();
        if len == 0 || !len.is_multiple_of(8) {
            return Err(CryptoError::BitsOutOfRange(len));
        }
        let mut bytes = [0u8; 16];
        bytes[..(len / 8) as usize].copy_from_slice(&bits.to_bytes());
        Ok(TruncatedTag { bytes, bits: len })
    }

    /// Packs the tag into a bit string; `None` when it is wider than 64 bits.
    pub fn to_bit_string(&self) -> Option<BitString> {
        BitString::from_bytes(self.as_bytes(), self.bits).ok()
    }

    /// Constant-time equality.
    pub fn ct_eq(&self, other: &TruncatedTag) -> bool {
        self.bits == other.bits && ct_eq(self.as_bytes(), other.as_bytes())
    }
}

impl fmt::Debug for TruncatedTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "TruncatedTag({}/{})",
            hex::encode(self.as_bytes()),
            self.bits
        )
    }
}

/// Keeps the leftmost `bits` bits (lowest-index bytes) of the tag.
pub fn truncate_tag(tag: &Tag128, bits: u32) -> Result<TruncatedTag, CryptoError> {
    if bits == 0 || bits > 128 || !bits.is_multiple_of(8) {
        return Err(CryptoError::BitsOutOfRange(bits));
    }
    let n = (bits / 8) as usize;
    let mut bytes = [0u8; 16];
    bytes[..n].copy_from_slice(&tag.0[..n]);
    Ok(TruncatedTag { bytes, bits })
}

/// Compares two byte strings without short-circuiting on the first
/// difference. Lengths are not secret.
pub fn ct_eq(a: &[u8], b: &[u8]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let diff = a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y));
    std::hint::black_box(diff) == 0
}
