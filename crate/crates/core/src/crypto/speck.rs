//! SPECK64/128: 32-bit words, 27 rounds, rotations 8 and 3.
//!
//! Word order follows the cipher designers' notation. A key written as
//! `l2 l1 l0 k0` (most significant word first) is the big-endian `u128`
//! of [`CipherKey128`]; a block written as `x y` is the big-endian `u64`
//! of [`Block64`].

use super::{Block64, CipherKey128};

pub const ROUNDS: usize = 27;

const ALPHA: u32 = 8;
const BETA: u32 = 3;

/// Expanded round keys for one cipher key.
#[derive(Clone)]
pub struct KeySchedule {
    round_keys: [u32; ROUNDS],
}

impl KeySchedule {
    pub fn round_keys(&self) -> &[u32; ROUNDS] {
        &self.round_keys
    }
}

impl std::fmt::Debug for KeySchedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("KeySchedule(..)")
    }
}

pub fn speck_key_schedule(key: &CipherKey128) -> KeySchedule {
    let k = key.as_u128();
    let mut rk = (k & 0xffff_ffff) as u32;
    let mut l = [(k >> 32) as u32, (k >> 64) as u32, (k >> 96) as u32];
    let mut round_keys = [0u32; ROUNDS];
    for (i, slot) in round_keys.iter_mut().enumerate() {
        *slot = rk;
        let j = i % 3;
        l[j] = rk.wrapping_add(l[j].rotate_right(ALPHA)) ^ i as u32;
        rk = rk.rotate_left(BETA) ^ l[j];
    }
    KeySchedule { round_keys }
}

#[inline(always)]
fn split(block: Block64) -> (u32, u32) {
    ((block.0 >> 32) as u32, block.0 as u32)
}

#[inline(always)]
fn join(x: u32, y: u32) -> Block64 {
    Block64((u64::from(x) << 32) | u64::from(y))
}

impl KeySchedule {
    pub fn encrypt(&self, plaintext: Block64) -> Block64 {
        let (mut x, mut y) = split(plaintext);
        for &k in &self.round_keys {
            x = x.rotate_right(ALPHA).wrapping_add(y) ^ k;
            y = y.rotate_left(BETA) ^ x;
        }
        join(x, y)
    }

    pub fn decrypt(&self, ciphertext: Block64) -> Block64 {
        let (mut x, mut y) = split(ciphertext);
        for &k in self.round_keys.iter().rev() {
            y = (y ^ x).rotate_right(BETA);
            x = (x ^ k).wrapping_sub(y).rotate_left(ALPHA);
        }
        join(x, y)
    }
}

pub fn speck_encrypt(key: &CipherKey128, plaintext: Block64) -> Block64 {
    speck_key_schedule(key).encrypt(plaintext)
}

pub fn speck_decrypt(key: &CipherKey128, ciphertext: Block64) -> Block64 {
    speck_key_schedule(key).decrypt(ciphertext)
}
