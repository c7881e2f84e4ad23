//! Known-answer tests for SPECK64/128 and Chaskey, plus cross-checks
//! against small, separately written reference implementations.

use canseal::crypto::{
    chaskey_mac, speck_decrypt, speck_encrypt, truncate_tag, Block64, CipherKey128, MacKey128,
};
use proptest::prelude::*;

const SPECK_VECTORS: [(u128, u64, u64); 4] = [
    (
        0x1b1a1918_13121110_0b0a0908_03020100,
        0x3b726574_7475432d,
        0x8c6fa548_454e028b,
    ),
    (0, 0, 0x680448d5_272f692c),
    (
        0x00010203_04050607_08090a0b_0c0d0e0f,
        0,
        0x7fcf015f_683be847,
    ),
    (
        0x0f0e0d0c_0b0a0908_07060504_03020100,
        0x01234567_89abcdef,
        0x88d65745_bb14a581,
    ),
];

#[test]
fn speck_known_answers() {
    for (key, pt, ct) in SPECK_VECTORS {
        let k = CipherKey128::from_u128(key);
        assert_eq!(
            speck_encrypt(&k, Block64(pt)),
            Block64(ct),
            "key {key:032x}"
        );
        assert_eq!(speck_decrypt(&k, Block64(ct)), Block64(pt));
    }
}

/// Key 00..0f, message 00..n-1.
const CHASKEY_SEQUENTIAL: [(usize, &str); 17] = [
    (0, "0a080a025a739afcb3ba4442930f71ae"),
    (1, "fe0e19bb14977763504dc61f38ccfb4b"),
    (2, "0364a47afb9ec7f41281214f6fa36544"),
    (3, "9b3fea87e36b7e49b700294eb43a3a0e"),
    (4, "dfe1a0ee2d87a762225db8ff3fb9b185"),
    (5, "3292c5ad557db013d178267d81b8ae41"),
    (7, "efa5b7d4bad9a7c41ad18b32a72e8e53"),
    (8, "7142e39532206e84c310b6f0f537664e"),
    (15, "94d1a5e8cf58ec556827872307689e73"),
    (16, "f5b634decb02cd5bb74ea635dbd91211"),
    (17, "3af5a000e70fcc6e53d13d8a84d1dbf3"),
    (31, "d90524daa1eacc3511d38d35f79ab76a"),
    (32, "a13deb31c8f22904ceffb9537b005c4c"),
    (33, "3ddc7a0aec44e05eb7d93f82e30163e5"),
    (48, "cd5147289fdfc9941cece868cb3e1763"),
    (63, "3423665b97d189be15ff9721dbd11515"),
    (64, "15dab08f0e47f993f2e14f2af695784f"),
];

/// Key 00112233..ff, message 00..n-1.
const CHASKEY_OTHER_KEY: [(usize, &str); 4] = [
    (0, "0830083f9930c74faad590906568a031"),
    (1, "844c61cbbfd207ab7475c20e02c701a2"),
    (16, "fd70a18ed1da665860a75b3cb109477f"),
    (64, "f2a1559c3ba04bef41fb60dd1b3de47b"),
];

fn sequential(n: usize) -> Vec<u8> {
    (0..n).map(|i| i as u8).collect()
}

#[test]
fn chaskey_known_answers() {
    let key = MacKey128::from_bytes(std::array::from_fn(|i| i as u8));
    for (n, tag) in CHASKEY_SEQUENTIAL {
        assert_eq!(
            hex::encode(chaskey_mac(&key, &sequential(n)).as_bytes()),
            tag,
            "length {n}"
        );
    }
    let key = MacKey128::from_bytes(std::array::from_fn(|i| (i as u8) * 0x11));
    for (n, tag) in CHASKEY_OTHER_KEY {
        assert_eq!(
            hex::encode(chaskey_mac(&key, &sequential(n)).as_bytes()),
            tag,
            "length {n}"
        );
    }
    let zero = MacKey128::from_bytes([0; 16]);
    assert_eq!(
        hex::encode(chaskey_mac(&zero, &[]).as_bytes()),
        "1c377cf261d71f76863a749811bbd859"
    );
}

#[test]
fn truncation_is_a_prefix_of_the_known_tag() {
    let key = MacKey128::from_bytes(std::array::from_fn(|i| i as u8));
    let tag = chaskey_mac(&key, &sequential(5));
    assert_eq!(
        hex::encode(truncate_tag(&tag, 24).unwrap().as_bytes()),
        "3292c5"
    );
}

mod oracle {
    //! Straight-line transcriptions used only for cross-checking.

    pub fn speck64_128(key: u128, block: u64) -> u64 {
        let mut k = key as u32;
        let mut l = vec![(key >> 32) as u32, (key >> 64) as u32, (key >> 96) as u32];
        let mut x = (block >> 32) as u32;
        let mut y = block as u32;
        for i in 0..27u32 {
            x = x.rotate_right(8).wrapping_add(y) ^ k;
            y = y.rotate_left(3) ^ x;
            let next_l = k.wrapping_add(l[i as usize].rotate_right(8)) ^ i;
            l.push(next_l);
            k = k.rotate_left(3) ^ next_l;
        }
        (u64::from(x) << 32) | u64::from(y)
    }

    fn words(b: &[u8]) -> [u32; 4] {
        let mut w = [0u32; 4];
        for (i, c) in b.chunks(4).enumerate() {
            w[i] = u32::from_le_bytes([c[0], c[1], c[2], c[3]]);
        }
        w
    }

    fn double(k: [u32; 4]) -> [u32; 4] {
        let wide = (u128::from(k[3]) << 96)
            | (u128::from(k[2]) << 64)
            | (u128::from(k[1]) << 32)
            | u128::from(k[0]);
        let mut d = wide << 1;
        if wide >> 127 == 1 {
            d ^= 0x87;
        }
        [
            d as u32,
            (d >> 32) as u32,
            (d >> 64) as u32,
            (d >> 96) as u32,
        ]
    }

    fn permute(v: &mut [u32; 4]) {
        for _ in 0..8 {
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
    }

    pub fn chaskey(key: &[u8; 16], msg: &[u8]) -> [u8; 16] {
        let k = words(key);
        let k1 = double(k);
        let k2 = double(k1);
        let complete = !msg.is_empty() && msg.len().is_multiple_of(16);
        let mut padded = msg.to_vec();
        if !complete {
            padded.push(1);
            while !padded.len().is_multiple_of(16) {
                padded.push(0);
            }
        }
        let last_key = if complete { k1 } else { k2 };
        let blocks: Vec<[u32; 4]> = padded.chunks(16).map(words).collect();
        let mut v = k;
        for (i, b) in blocks.iter().enumerate() {
            for j in 0..4 {
                v[j] ^= b[j];
            }
            if i + 1 == blocks.len() {
                for j in 0..4 {
                    v[j] ^= last_key[j];
                }
            }
            permute(&mut v);
        }
        for j in 0..4 {
            v[j] ^= last_key[j];
        }
        let mut out = [0u8; 16];
        for j in 0..4 {
            out[4 * j..4 * j + 4].copy_from_slice(&v[j].to_le_bytes());
        }
        out
    }
}

#[test]
fn oracles_reproduce_the_known_answers() {
    for (key, pt, ct) in SPECK_VECTORS {
        assert_eq!(oracle::speck64_128(key, pt), ct);
    }
    let key: [u8; 16] = std::array::from_fn(|i| i as u8);
    for (n, tag) in CHASKEY_SEQUENTIAL {
        assert_eq!(hex::encode(oracle::chaskey(&key, &sequential(n))), tag);
    }
}

proptest! {
    #[test]
    fn speck_matches_oracle(key: u128, pt: u64) {
        let ct = speck_encrypt(&CipherKey128::from_u128(key), Block64(pt));
        prop_assert_eq!(ct.0, oracle::speck64_128(key, pt));
        prop_assert_eq!(speck_decrypt(&CipherKey128::from_u128(key), ct), Block64(pt));
    }

    #[test]
    fn chaskey_matches_oracle(key: [u8; 16], msg in proptest::collection::vec(any::<u8>(), 0..100)) {
        let tag = chaskey_mac(&MacKey128::from_bytes(key), &msg);
        prop_assert_eq!(*tag.as_bytes(), oracle::chaskey(&key, &msg));
    }
}
