#![allow(dead_code)]

use canseal::can::CanId;
use canseal::freshness::FreshnessState;
use canseal::keystore::{ChannelKeys, KeyId, KeyMaterial, KeyStore, Provisioning};
use canseal::profile::{
    builtin_profile_1, builtin_profile_1_fv, builtin_profile_secoc_baseline,
    builtin_profile_secoc_fv, ValidatedProfile,
};

pub const MAC_KEY: [u8; 16] = [
    0x2b, 0x7e, 0x15, 0x16, 0x28, 0xae, 0xd2, 0xa6, 0xab, 0xf7, 0x15, 0x88, 0x09, 0xcf, 0x4f, 0x3c,
];
pub const ENC_KEY: [u8; 16] = [
    0x1b, 0x1a, 0x19, 0x18, 0x13, 0x12, 0x11, 0x10, 0x0b, 0x0a, 0x09, 0x08, 0x03, 0x02, 0x01, 0x00,
];

pub fn id(raw: u32) -> CanId {
    CanId::new(raw).unwrap()
}

/// One channel on `can_id` with the fixed test keys.
pub fn store_with(can_id: CanId, mac: [u8; 16], enc: [u8; 16]) -> KeyStore {
    let mut s = KeyStore::new();
    s.initialize(Provisioning {
        keys: vec![
            (KeyId::new("mac"), KeyMaterial::new(mac)),
            (KeyId::new("enc"), KeyMaterial::new(enc)),
        ],
        channels: vec![ChannelKeys {
            can_id,
            mac_key: KeyId::new("mac"),
            enc_key: KeyId::new("enc"),
        }],
    })
    .unwrap();
    s
}

pub fn store(can_id: CanId) -> KeyStore {
    store_with(can_id, MAC_KEY, ENC_KEY)
}

pub fn profile_1() -> ValidatedProfile {
    ValidatedProfile::new(builtin_profile_1()).unwrap()
}

pub fn profile_1_fv() -> ValidatedProfile {
    ValidatedProfile::new(builtin_profile_1_fv()).unwrap()
}

pub fn secoc() -> ValidatedProfile {
    ValidatedProfile::new(builtin_profile_secoc_baseline()).unwrap()
}

pub fn secoc_fv() -> ValidatedProfile {
    ValidatedProfile::new(builtin_profile_secoc_fv()).unwrap()
}

pub fn all_profiles() -> Vec<ValidatedProfile> {
    vec![profile_1(), secoc(), profile_1_fv(), secoc_fv()]
}

pub fn freshness(profile: &ValidatedProfile, can_id: CanId) -> Option<FreshnessState> {
    profile
        .freshness_bits()
        .map(|bits| FreshnessState::new(can_id, bits, profile.layout().fvt_bits).unwrap())
}
