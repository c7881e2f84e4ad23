//! Chaskey MAC with the 8-round permutation.
//!
//! Keys, message blocks and the tag are little-endian 32-bit words, as in
//! the designers' reference code. The final block is XORed with subkey K1
//! when it is complete and with K2 after `0x01 0x00..` padding otherwise
//! (including the empty message).

use super::{MacKey128, Tag128};

#[inline(always)]
fn round(v: &mut [u32; 4]) {
    v[0] = v[0].wrapping_add(v[1]);
    v[1] = v[1].rotate_left(5) ^ v[0];
    v[0] = v[0].rotate_left(16);
    v[2] = v[2].wrapping_add(v[3]);
    v[3] = v[3].rotate_left(8) ^ v[2];
    v[0] = v[0].wrapping_add(v[3]);
    v[3] = v[3].rotate_left(13) ^ v[0];
    v[2] = v[2].wrapping_add(v[1]);
    v[1] = v[1].rotate_left(7) ^ v[2];
    v[2] = v[2].rotate_left(16);
}

#[inline(always)]
fn permute8(v: &mut [u32; 4]) {
    for _ in 0..8 {
        round(v);
    }
}

/// Multiplication by x in GF(2^128) with the reduction constant 0x87,
/// applied without a secret-dependent branch or table index.
fn times_two(k: &[u32; 4]) -> [u32; 4] {
    let carry = 0x87 & 0u32.wrapping_sub(k[3] >> 31);
    [
        (k[0] << 1) ^ carry,
        (k[1] << 1) | (k[0] >> 31),
        (k[2] << 1) | (k[1] >> 31),
        (k[3] << 1) | (k[2] >> 31),
    ]
}

fn load(block: &[u8; 16]) -> [u32; 4] {
    let mut w = [0u32; 4];
    for (i, word) in w.iter_mut().enumerate() {
        *word = u32::from_le_bytes(block[4 * i..4 * i + 4].try_into().unwrap());
    }
    w
}

#[inline(always)]
fn xor_in(v: &mut [u32; 4], w: &[u32; 4]) {
    for (a, b) in v.iter_mut().zip(w) {
        *a ^= b;
    }
}

/// A MAC key with its two finalization subkeys precomputed.
#[derive(Clone)]
pub struct Chaskey {
    k: [u32; 4],
    k1: [u32; 4],
    k2: [u32; 4],
}

impl std::fmt::Debug for Chaskey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Chaskey(..)")
    }
}

impl Chaskey {
    pub fn new(key: &MacKey128) -> Self {
        let k = load(key.as_bytes());
        let k1 = times_two(&k);
        let k2 = times_two(&k1);
        Chaskey { k, k1, k2 }
    }

    pub fn mac(&self, message: &[u8]) -> Tag128 {
        let mut v = self.k;
        let mut rest = message;
        while rest.len() > 16 {
            let (block, tail) = rest.split_at(16);
            xor_in(&mut v, &load(block.try_into().unwrap()));
            permute8(&mut v);
            rest = tail;
        }

        let mut last = [0u8; 16];
        let subkey = if rest.len() == 16 {
            last.copy_from_slice(rest);
            &self.k1
        } else {
            last[..rest.len()].copy_from_slice(rest);
            last[rest.len()] = 0x01;
            &self.k2
        };
        xor_in(&mut v, &load(&last));
        xor_in(&mut v, subkey);
        permute8(&mut v);
        xor_in(&mut v, subkey);

        let mut tag = [0u8; 16];
        for (i, word) in v.iter().enumerate() {
            tag[4 * i..4 * i + 4].copy_from_slice(&word.to_le_bytes());
        }
        Tag128(tag)
    }
}

pub fn chaskey_mac(key: &MacKey128, message: &[u8]) -> Tag128 {
    Chaskey::new(key).mac(message)
}
