//! Secured data field codec.
//!
//! Sending: `MAC = chaskey(k_mac, payload ‖ FV)`, truncated to its leftmost
//! `mact_bits`; the block `payload ‖ FVT ‖ MACT` (most significant field
//! first) is then encrypted as one SPECK64/128 block. Receiving runs the
//! inverse: decrypt, split, rebuild the FV, recompute and compare the MACT
//! in constant time, and only then advance the freshness state.
//!
//! The MAC input is the bit string `payload ‖ FV` packed MSB-first and
//! zero padded to a whole byte. The CAN identifier is not part of it;
//! identifiers are bound to their own keys in the [`KeyStore`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitString;
use crate::can::{CanFrame, CanId};
use crate::crypto::{truncate_tag, Block64, TruncatedTag};
use crate::freshness::{
    commit_fv, next_fv, reconstruct_fvv, truncate_fv, FreshnessError, FreshnessState,
    FreshnessValue,
};
use crate::keystore::{KeyStore, KeyStoreError};
use crate::profile::{FrameLayout, ValidatedProfile};

/// Payload bits of one secured frame; width equals the layout's
/// `payload_bits`.
pub type PlainPayload = BitString;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("{field} is {got} bits, layout expects {expected}")]
    LayoutMismatch {
        field: &'static str,
        expected: u32,
        got: u32,
    },
    #[error("secured frames carry 8 data bytes, got {0}")]
    BadDlc(u8),
    #[error("MAC mismatch")]
    MacMismatch,
    #[error("freshness value outside the retry window")]
    WindowExceeded,
    #[error("freshness counter exhausted")]
    CounterExhausted,
    #[error("no keys bound to CAN id {0}")]
    UnknownChannel(CanId),
    #[error("key store not initialized")]
    Uninitialized,
    #[error("profile uses freshness but no freshness state was supplied")]
    MissingFreshness,
    #[error("freshness state does not match this channel or profile")]
    FreshnessMismatch,
}

/// Why a received frame was dropped, as recorded in decision logs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Rejection {
    MacMismatch,
    WindowExceeded,
    BadDlc,
    UnknownChannel,
    Other,
}

impl CodecError {
    pub fn rejection(&self) -> Rejection {
        match self {
            CodecError::MacMismatch => Rejection::MacMismatch,
            CodecError::WindowExceeded => Rejection::WindowExceeded,
            CodecError::BadDlc(_) => Rejection::BadDlc,
            CodecError::UnknownChannel(_) => Rejection::UnknownChannel,
            _ => Rejection::Other,
        }
    }
}

impl From<KeyStoreError> for CodecError {
    fn from(e: KeyStoreError) -> Self {
        match e {
            KeyStoreError::UnknownChannel(id) => CodecError::UnknownChannel(id),
            _ => CodecError::Uninitialized,
        }
    }
}

impl From<FreshnessError> for CodecError {
    fn from(e: FreshnessError) -> Self {
        match e {
            FreshnessError::CounterExhausted => CodecError::CounterExhausted,
            FreshnessError::WindowExceeded => CodecError::WindowExceeded,
            _ => CodecError::FreshnessMismatch,
        }
    }
}

fn check_width(field: &'static str, bits: &BitString, expected: u32) -> Result<(), CodecError> {
    if bits.len() != expected {
        return Err(CodecError::LayoutMismatch {
            field,
            expected,
            got: bits.len(),
        });
    }
    Ok(())
}

/// Packs `payload ‖ fvt ‖ mact` into one block, payload in the most
/// significant bits.
pub fn assemble_authenticated(
    payload: &PlainPayload,
    fvt: &BitString,
    mact: &TruncatedTag,
    layout: &FrameLayout,
) -> Result<Block64, CodecError> {
    check_width("payload", payload, layout.payload_bits)?;
    check_width("FVT", fvt, layout.fvt_bits)?;
    let mact = mact.to_bit_string().ok_or(CodecError::LayoutMismatch {
        field: "MACT",
        expected: layout.mact_bits,
        got: mact.bits(),
    })?;
    check_width("MACT", &mact, layout.mact_bits)?;
    let block = payload
        .concat(fvt)
        .and_then(|b| b.concat(&mact))
        .map_err(|_| CodecError::LayoutMismatch {
            field: "data field",
            expected: 64,
            got: layout.total(),
        })?;
    check_width("data field", &block, 64)?;
    Ok(Block64(block.value()))
}

/// Splits a plaintext block into `(payload, fvt, mact)` per `layout`.
pub fn split_authenticated(
    block: Block64,
    layout: &FrameLayout,
) -> (PlainPayload, BitString, BitString) {
    let v = block.0;
    let mact = BitString::low_bits(v, layout.mact_bits).expect("layout fits 64 bits");
    let fvt = BitString::low_bits(v >> layout.mact_bits, layout.fvt_bits).expect("layout fits");
    let shift = layout.mact_bits + layout.fvt_bits;
    let payload = BitString::low_bits(v >> shift, layout.payload_bits).expect("layout fits");
    (payload, fvt, mact)
}

/// `payload ‖ FV` packed MSB-first, zero padded to a byte boundary.
fn mac_input(payload: &PlainPayload, fv: Option<&FreshnessValue>) -> ([u8; 16], usize) {
    let (mut acc, mut bits) = (u128::from(payload.value()), payload.len());
    if let Some(fv) = fv {
        acc = (acc << fv.bits()) | u128::from(fv.counter());
        bits += fv.bits();
    }
    let n = bits.div_ceil(8) as usize;
    let aligned = acc << (n as u32 * 8 - bits);
    let be = aligned.to_be_bytes();
    let mut out = [0u8; 16];
    out[..n].copy_from_slice(&be[16 - n..]);
    (out, n)
}

fn channel_freshness<'a>(
    can_id: CanId,
    profile: &ValidatedProfile,
    freshness: Option<&'a mut FreshnessState>,
) -> Result<Option<&'a mut FreshnessState>, CodecError> {
    let Some(fv_bits) = profile.freshness_bits() else {
        return Ok(None);
    };
    let state = freshness.ok_or(CodecError::MissingFreshness)?;
    if state.can_id() != can_id
        || state.fv_bits() != fv_bits
        || state.trunc_bits() != profile.layout().fvt_bits
    {
        return Err(CodecError::FreshnessMismatch);
    }
    Ok(Some(state))
}

fn expected_mact(
    keys: &KeyStore,
    can_id: CanId,
    payload: &PlainPayload,
    fv: Option<&FreshnessValue>,
    layout: &FrameLayout,
) -> Result<TruncatedTag, CodecError> {
    let (input, n) = mac_input(payload, fv);
    let tag = keys.mac_for(can_id, &input[..n])?;
    Ok(truncate_tag(&tag, layout.mact_bits).expect("validated profiles use byte-aligned MACT"))
}

/// Builds a secured frame. With a freshness-enabled profile the state's
/// send counter advances by one.
pub fn secure_frame(
    can_id: CanId,
    payload: &PlainPayload,
    profile: &ValidatedProfile,
    keys: &KeyStore,
    freshness: Option<&mut FreshnessState>,
) -> Result<CanFrame, CodecError> {
    let layout = profile.layout();
    check_width("payload", payload, layout.payload_bits)?;
    keys.binding(can_id)?;
    let state = channel_freshness(can_id, profile, freshness)?;

    let fv = match state {
        Some(s) => Some(next_fv(s)?),
        None => None,
    };
    let fvt = match &fv {
        Some(v) => truncate_fv(v, layout.fvt_bits)?,
        None => BitString::empty(),
    };
    let mact = expected_mact(keys, can_id, payload, fv.as_ref(), &layout)?;
    let block = assemble_authenticated(payload, &fvt, &mact, &layout)?;
    let wire = if profile.encrypts() {
        keys.encrypt_for(can_id, block)?
    } else {
        block
    };
    Ok(CanFrame::from_data_field(can_id, wire.to_bytes()))
}

fn open_block(
    frame: &CanFrame,
    profile: &ValidatedProfile,
    keys: &KeyStore,
) -> Result<Block64, CodecError> {
    let data = frame.data_field().ok_or(CodecError::BadDlc(frame.dlc()))?;
    let wire = Block64::from_bytes(data);
    if profile.encrypts() {
        Ok(keys.decrypt_for(frame.id(), wire)?)
    } else {
        Ok(wire)
    }
}

/// Decrypts and authenticates a frame. The freshness state only advances
/// when the MAC matches.
pub fn verify_frame(
    frame: &CanFrame,
    profile: &ValidatedProfile,
    keys: &KeyStore,
    freshness: Option<&mut FreshnessState>,
) -> Result<PlainPayload, CodecError> {
    let can_id = frame.id();
    let layout = profile.layout();
    let block = open_block(frame, profile, keys)?;
    keys.binding(can_id)?;
    let (payload, fvt, mact_bits) = split_authenticated(block, &layout);

    let state = channel_freshness(can_id, profile, freshness)?;
    let fvv = match &state {
        Some(s) => Some(reconstruct_fvv(s, &fvt)?),
        None => None,
    };
    let expected = expected_mact(keys, can_id, &payload, fvv.as_ref(), &layout)?;
    let received =
        TruncatedTag::from_bit_string(&mact_bits).map_err(|_| CodecError::MacMismatch)?;
    if !expected.ct_eq(&received) {
        return Err(CodecError::MacMismatch);
    }
    if let (Some(s), Some(v)) = (state, fvv) {
        commit_fv(s, &v)?;
    }
    Ok(payload)
}

/// Decrypts and slices out the payload with no MAC or freshness check.
///
/// Gateway fast path only: a tampered frame yields garbled payload bits
/// without any error.
pub fn extract_payload_unauthenticated(
    frame: &CanFrame,
    profile: &ValidatedProfile,
    keys: &KeyStore,
) -> Result<PlainPayload, CodecError> {
    let block = open_block(frame, profile, keys)?;
    Ok(split_authenticated(block, &profile.layout()).0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{truncate_tag, Tag128};
    use crate::keystore::{ChannelKeys, KeyId, KeyMaterial, Provisioning};
    use crate::profile::{builtin_profile_1, builtin_profile_1_fv, builtin_profile_secoc_baseline};

    fn id() -> CanId {
        CanId::new(0x123).unwrap()
    }

    fn keys() -> KeyStore {
        let mut s = KeyStore::new();
        s.initialize(Provisioning {
            keys: vec![
                (KeyId::new("m"), KeyMaterial::new([0x5a; 16])),
                (KeyId::new("e"), KeyMaterial::new([0xa5; 16])),
            ],
            channels: vec![ChannelKeys {
                can_id: id(),
                mac_key: KeyId::new("m"),
                enc_key: KeyId::new("e"),
            }],
        })
        .unwrap();
        s
    }

    fn mact(value: u32) -> TruncatedTag {
        let mut t = [0u8; 16];
        t[..3].copy_from_slice(&value.to_be_bytes()[1..]);
        truncate_tag(&Tag128(t), 24).unwrap()
    }

    #[test]
    fn assemble_40_0_24() {
        let layout = FrameLayout {
            payload_bits: 40,
            fvt_bits: 0,
            mact_bits: 24,
        };
        let p = BitString::new(0xAABBCCDDEE, 40).unwrap();
        let b = assemble_authenticated(&p, &BitString::empty(), &mact(0x112233), &layout).unwrap();
        assert_eq!(b, Block64(0xAABBCCDDEE112233));
    }

    #[test]
    fn assemble_32_8_24() {
        let layout = FrameLayout {
            payload_bits: 32,
            fvt_bits: 8,
            mact_bits: 24,
        };
        let p = BitString::new(0xDEADBEEF, 32).unwrap();
        let fvt = BitString::new(0x07, 8).unwrap();
        let b = assemble_authenticated(&p, &fvt, &mact(0x112233), &layout).unwrap();
        assert_eq!(b, Block64(0xDEADBEEF07112233));
        let (p2, f2, m2) = split_authenticated(b, &layout);
        assert_eq!((p2, f2, m2.value()), (p, fvt, 0x112233));
    }

    #[test]
    fn assemble_wrong_payload_width() {
        let layout = FrameLayout {
            payload_bits: 40,
            fvt_bits: 0,
            mact_bits: 24,
        };
        let p = BitString::new(0xAABBCCDD, 32).unwrap();
        assert!(matches!(
            assemble_authenticated(&p, &BitString::empty(), &mact(0), &layout),
            Err(CodecError::LayoutMismatch {
                field: "payload",
                ..
            })
        ));
    }

    #[test]
    fn mac_input_packing() {
        let p = BitString::new(0xAABBCCDDEE, 40).unwrap();
        let (buf, n) = mac_input(&p, None);
        assert_eq!(&buf[..n], &[0xAA, 0xBB, 0xCC, 0xDD, 0xEE]);
        let fv = FreshnessValue::new(0x0102, 16).unwrap();
        let (buf, n) = mac_input(&p, Some(&fv));
        assert_eq!(&buf[..n], &[0xAA, 0xBB, 0xCC, 0xDD, 0xEE, 0x01, 0x02]);
        let odd = BitString::new(0b101, 3).unwrap();
        let fv = FreshnessValue::new(1, 2).unwrap();
        let (buf, n) = mac_input(&odd, Some(&fv));
        assert_eq!(&buf[..n], &[0b1010_1000]);
    }

    #[test]
    fn round_trip_profile_1() {
        let profile = ValidatedProfile::new(builtin_profile_1()).unwrap();
        let ks = keys();
        let p = BitString::new(0x0102030405, 40).unwrap();
        let frame = secure_frame(id(), &p, &profile, &ks, None).unwrap();
        assert_eq!(frame.dlc(), 8);
        assert_eq!(verify_frame(&frame, &profile, &ks, None).unwrap(), p);
        assert_eq!(
            extract_payload_unauthenticated(&frame, &profile, &ks).unwrap(),
            p
        );
    }

    #[test]
    fn baseline_payload_is_readable() {
        let profile = ValidatedProfile::new(builtin_profile_secoc_baseline()).unwrap();
        let ks = keys();
        let p = BitString::new(0xAABBCCDDEE, 40).unwrap();
        let frame = secure_frame(id(), &p, &profile, &ks, None).unwrap();
        assert_eq!(&frame.data()[..5], &[0xAA, 0xBB, 0xCC, 0xDD, 0xEE]);
    }

    #[test]
    fn freshness_is_required_when_profile_uses_it() {
        let profile = ValidatedProfile::new(builtin_profile_1_fv()).unwrap();
        let p = BitString::new(1, 32).unwrap();
        assert_eq!(
            secure_frame(id(), &p, &profile, &keys(), None),
            Err(CodecError::MissingFreshness)
        );
        let mut wrong = FreshnessState::new(id(), 16, 8).unwrap();
        assert_eq!(
            secure_frame(id(), &p, &profile, &keys(), Some(&mut wrong)),
            Err(CodecError::FreshnessMismatch)
        );
    }

    #[test]
    fn replay_with_freshness_is_rejected() {
        let profile = ValidatedProfile::new(builtin_profile_1_fv()).unwrap();
        let ks = keys();
        let mut tx = FreshnessState::new(id(), 32, 8).unwrap();
        let mut rx = tx.clone();
        let p = BitString::new(0xCAFEF00D, 32).unwrap();
        let frame = secure_frame(id(), &p, &profile, &ks, Some(&mut tx)).unwrap();
        assert_eq!(
            verify_frame(&frame, &profile, &ks, Some(&mut rx)).unwrap(),
            p
        );
        assert_eq!(
            verify_frame(&frame, &profile, &ks, Some(&mut rx)),
            Err(CodecError::WindowExceeded)
        );
        assert_eq!(rx.latest_received(), 1);
    }

    #[test]
    fn bad_dlc_and_unknown_channel() {
        let profile = ValidatedProfile::new(builtin_profile_1()).unwrap();
        let ks = keys();
        let short = CanFrame::new(id(), &[1, 2, 3]).unwrap();
        assert_eq!(
            verify_frame(&short, &profile, &ks, None),
            Err(CodecError::BadDlc(3))
        );
        let other = CanFrame::from_data_field(CanId::new(0x7).unwrap(), [0; 8]);
        assert!(matches!(
            verify_frame(&other, &profile, &ks, None),
            Err(CodecError::UnknownChannel(_))
        ));
        let p = BitString::new(0, 40).unwrap();
        assert!(matches!(
            secure_frame(CanId::new(0x7).unwrap(), &p, &profile, &ks, None),
            Err(CodecError::UnknownChannel(_))
        ));
    }

    #[test]
    fn unauthenticated_extraction_ignores_mac() {
        let profile = ValidatedProfile::new(builtin_profile_secoc_baseline()).unwrap();
        let ks = keys();
        let p = BitString::new(0x1122334455, 40).unwrap();
        let frame = secure_frame(id(), &p, &profile, &ks, None).unwrap();
        let mac_tampered = frame.flip_bit(63);
        assert_eq!(
            verify_frame(&mac_tampered, &profile, &ks, None),
            Err(CodecError::MacMismatch)
        );
        assert_eq!(
            extract_payload_unauthenticated(&mac_tampered, &profile, &ks).unwrap(),
            p
        );
        let payload_tampered = frame.flip_bit(0);
        let garbled = extract_payload_unauthenticated(&payload_tampered, &profile, &ks).unwrap();
        assert_ne!(garbled, p);
    }
}
