//! Text formats: candump lines, bit strings and profile files.

use canseal::bits::BitString;
use canseal::can::{CanFrame, CanId};
use canseal::candump::{parse_candump_line, CandumpRecord, Timestamp};
use canseal::profile::{builtin_profiles, load_profile, ProfileError};
use proptest::prelude::*;

#[test]
fn builtin_profiles_survive_a_config_round_trip() {
    for p in builtin_profiles() {
        assert_eq!(load_profile(&p.to_config_string()).unwrap(), p);
    }
}

#[test]
fn example_profile_file() {
    let text = "\
# example
name = cluster
algorithmFamily = Chaskey
algorithmMode = Chaskey_MAC
authInfoTruncLength = 24 bit
freshnessValueLength = not set
algorithmEncryption = SPECK64/128
";
    let p = load_profile(text).unwrap();
    let layout = p.validate().unwrap();
    assert_eq!(
        (layout.payload_bits, layout.fvt_bits, layout.mact_bits),
        (40, 0, 24)
    );
}

#[test]
fn oversized_layout_is_refused() {
    let text = "name = big\nauthInfoTruncLength = 48\nfreshnessValueLength = 32\nfreshnessValueTruncLength = 16\n";
    assert_eq!(
        load_profile(text),
        Err(ProfileError::LayoutOverflow {
            needed: 64,
            available: 56
        })
    );
}

fn frame_strategy() -> impl Strategy<Value = CanFrame> {
    (0u32..=0x7FF, proptest::collection::vec(any::<u8>(), 0..=8))
        .prop_map(|(id, data)| CanFrame::new(CanId::new(id).unwrap(), &data).unwrap())
}

proptest! {
    #[test]
    fn candump_round_trip(frame in frame_strategy(), micros in 0u64..4_000_000_000_000_000, iface in "[a-z][a-z0-9]{0,7}") {
        let rec = CandumpRecord { timestamp: Timestamp::from_micros(micros), interface: iface, frame };
        prop_assert_eq!(parse_candump_line(&rec.to_string()), Ok(rec));
    }

    #[test]
    fn bit_string_bytes_round_trip(value in any::<u64>(), len in 0u32..=64) {
        let b = BitString::low_bits(value, len).unwrap();
        let bytes = b.to_bytes();
        prop_assert_eq!(bytes.len(), len.div_ceil(8) as usize);
        prop_assert_eq!(BitString::from_bytes(&bytes, len), Ok(b));
    }

    #[test]
    fn concat_preserves_both_parts(a in any::<u32>(), b in any::<u32>(), la in 0u32..=32, lb in 0u32..=32) {
        let x = BitString::low_bits(u64::from(a), la).unwrap();
        let y = BitString::low_bits(u64::from(b), lb).unwrap();
        let z = x.concat(&y).unwrap();
        prop_assert_eq!(z.len(), la + lb);
        prop_assert_eq!(z.value() >> lb, x.value());
        prop_assert_eq!(BitString::low_bits(z.value(), lb).unwrap(), y);
    }

    #[test]
    fn garbage_lines_never_panic(line in "\\PC{0,60}") {
        let _ = parse_candump_line(&line);
    }
}
