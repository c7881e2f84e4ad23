//! Per-identifier monotonic counters.
//!
//! Senders advance `send_counter` and put its low `trunc_bits` on the wire
//! (FVT). Receivers rebuild the full value for verification (FVV) as the
//! smallest counter strictly greater than the latest accepted one whose low
//! bits match the FVT, and only accept it within `retry_window` steps.
//! Counters start at 0 and the first transmitted value is 1, so 0 means
//! "nothing received yet".

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitString;
use crate::can::CanId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum FreshnessError {
    #[error("freshness counter exhausted; re-keying required")]
    CounterExhausted,
    #[error("truncation to {bits} bits exceeds the {available}-bit freshness value")]
    BitsOutOfRange { bits: u32, available: u32 },
    #[error("no freshness candidate within the retry window")]
    WindowExceeded,
    #[error("received FVT has {got} bits, profile expects {expected}")]
    LengthMismatch { expected: u32, got: u32 },
    #[error("committed value {fvv} is not newer than {latest}")]
    StaleCommit { fvv: u64, latest: u64 },
    #[error("invalid freshness configuration: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FreshnessValue {
    counter: u64,
    bits: u32,
}

impl FreshnessValue {
    pub fn new(counter: u64, bits: u32) -> Result<Self, FreshnessError> {
        if bits == 0 || bits > 64 {
            return Err(FreshnessError::InvalidConfig(
                "freshness value width must be 1..=64",
            ));
        }
        if bits < 64 && counter >> bits != 0 {
            return Err(FreshnessError::CounterExhausted);
        }
        Ok(FreshnessValue { counter, bits })
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn to_bit_string(&self) -> BitString {
        BitString::new(self.counter, self.bits).expect("counter fits its width")
    }
}

fn max_counter(bits: u32) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

/// Sender and receiver counters for one CAN identifier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FreshnessState {
    can_id: CanId,
    fv_bits: u32,
    trunc_bits: u32,
    send_counter: u64,
    latest_received: u64,
    retry_window: u64,
}

impl FreshnessState {
    /// Fresh counters with the default retry window
    /// `max(1, 2^trunc_bits - 1)`.
    pub fn new(can_id: CanId, fv_bits: u32, trunc_bits: u32) -> Result<Self, FreshnessError> {
        if fv_bits == 0 || fv_bits > 64 {
            return Err(FreshnessError::InvalidConfig(
                "freshness value width must be 1..=64",
            ));
        }
        if trunc_bits > fv_bits {
            return Err(FreshnessError::BitsOutOfRange {
                bits: trunc_bits,
                available: fv_bits,
            });
        }
        Ok(FreshnessState {
            can_id,
            fv_bits,
            trunc_bits,
            send_counter: 0,
            latest_received: 0,
            retry_window: max_counter(trunc_bits).max(1),
        })
    }

    pub fn with_retry_window(mut self, window: u64) -> Result<Self, FreshnessError> {
        if window == 0 {
            return Err(FreshnessError::InvalidConfig(
                "retry window must be positive",
            ));
        }
        self.retry_window = window;
        Ok(self)
    }

    pub fn can_id(&self) -> CanId {
        self.can_id
    }

    pub fn fv_bits(&self) -> u32 {
        self.fv_bits
    }

    pub fn trunc_bits(&self) -> u32 {
        self.trunc_bits
    }

    pub fn send_counter(&self) -> u64 {
        self.send_counter
    }

    pub fn latest_received(&self) -> u64 {
        self.latest_received
    }

    pub fn retry_window(&self) -> u64 {
        self.retry_window
    }

    pub fn set_send_counter(&mut self, counter: u64) -> Result<(), FreshnessError> {
        if counter > max_counter(self.fv_bits) {
            return Err(FreshnessError::CounterExhausted);
        }
        self.send_counter = counter;
        Ok(())
    }
}

/// Advances the send counter and returns the new value.
pub fn next_fv(state: &mut FreshnessState) -> Result<FreshnessValue, FreshnessError> {
    if state.send_counter >= max_counter(state.fv_bits) {
        return Err(FreshnessError::CounterExhausted);
    }
    state.send_counter += 1;
    FreshnessValue::new(state.send_counter, state.fv_bits)
}

/// The least-significant `bits` bits of the counter.
pub fn truncate_fv(fv: &FreshnessValue, bits: u32) -> Result<BitString, FreshnessError> {
    if bits > fv.bits {
        return Err(FreshnessError::BitsOutOfRange {
            bits,
            available: fv.bits,
        });
    }
    Ok(BitString::low_bits(fv.counter, bits).expect("bits <= 64"))
}

pub fn reconstruct_fvv(
    state: &FreshnessState,
    fvt: &BitString,
) -> Result<FreshnessValue, FreshnessError> {
    if fvt.len() != state.trunc_bits {
        return Err(FreshnessError::LengthMismatch {
            expected: state.trunc_bits,
            got: fvt.len(),
        });
    }
    let latest = u128::from(state.latest_received);
    let modulus = 1u128 << fvt.len();
    let mut candidate = latest - latest % modulus + u128::from(fvt.value());
    if candidate <= latest {
        candidate += modulus;
    }
    if candidate - latest > u128::from(state.retry_window)
        || candidate > u128::from(max_counter(state.fv_bits))
    {
        return Err(FreshnessError::WindowExceeded);
    }
    FreshnessValue::new(candidate as u64, state.fv_bits)
}

/// Records an accepted FVV as the latest received counter.
pub fn commit_fv(state: &mut FreshnessState, fvv: &FreshnessValue) -> Result<(), FreshnessError> {
    if fvv.counter <= state.latest_received {
        return Err(FreshnessError::StaleCommit {
            fvv: fvv.counter,
            latest: state.latest_received,
        });
    }
    state.latest_received = fvv.counter;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id() -> CanId {
        CanId::new(0x100).unwrap()
    }

    fn rx(latest: u64, window: Option<u64>) -> FreshnessState {
        let mut s = FreshnessState::new(id(), 16, 8).unwrap();
        s.latest_received = latest;
        match window {
            Some(w) => s.with_retry_window(w).unwrap(),
            None => s,
        }
    }

    fn fvt(v: u64) -> BitString {
        BitString::new(v, 8).unwrap()
    }

    #[test]
    fn next_fv_starts_at_one_and_steps_by_one() {
        let mut s = FreshnessState::new(id(), 16, 8).unwrap();
        assert_eq!(next_fv(&mut s).unwrap().counter(), 1);
        assert_eq!(s.send_counter(), 1);
        let a = next_fv(&mut s).unwrap().counter();
        let b = next_fv(&mut s).unwrap().counter();
        assert_eq!(b - a, 1);
    }

    #[test]
    fn next_fv_exhaustion() {
        let mut s = FreshnessState::new(id(), 16, 8).unwrap();
        s.set_send_counter(0xFFFF).unwrap();
        assert_eq!(next_fv(&mut s), Err(FreshnessError::CounterExhausted));
        let mut s = FreshnessState::new(id(), 64, 8).unwrap();
        s.set_send_counter(u64::MAX - 1).unwrap();
        assert_eq!(next_fv(&mut s).unwrap().counter(), u64::MAX);
        assert_eq!(next_fv(&mut s), Err(FreshnessError::CounterExhausted));
    }

    #[test]
    fn truncation_keeps_low_bits() {
        let fv = FreshnessValue::new(0x0105, 16).unwrap();
        assert_eq!(
            truncate_fv(&fv, 8).unwrap(),
            BitString::new(0x05, 8).unwrap()
        );
        assert_eq!(truncate_fv(&fv, 16).unwrap(), fv.to_bit_string());
        assert_eq!(truncate_fv(&fv, 0).unwrap(), BitString::empty());
        assert!(matches!(
            truncate_fv(&fv, 17),
            Err(FreshnessError::BitsOutOfRange { .. })
        ));
    }

    #[test]
    fn reconstruct_next_value() {
        assert_eq!(
            reconstruct_fvv(&rx(0x0005, None), &fvt(0x06))
                .unwrap()
                .counter(),
            0x0006
        );
    }

    #[test]
    fn reconstruct_across_low_byte_wrap() {
        assert_eq!(
            reconstruct_fvv(&rx(0x00FE, None), &fvt(0x01))
                .unwrap()
                .counter(),
            0x0101
        );
    }

    #[test]
    fn reconstruct_outside_window() {
        assert_eq!(
            reconstruct_fvv(&rx(0x0005, Some(16)), &fvt(0x05)),
            Err(FreshnessError::WindowExceeded)
        );
    }

    #[test]
    fn reconstruct_rejects_wrong_width() {
        assert!(matches!(
            reconstruct_fvv(&rx(5, None), &BitString::new(6, 4).unwrap()),
            Err(FreshnessError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn reconstruct_never_passes_counter_limit() {
        let mut s = FreshnessState::new(id(), 8, 8).unwrap();
        s.latest_received = 0xFF;
        assert_eq!(
            reconstruct_fvv(&s, &fvt(0x00)),
            Err(FreshnessError::WindowExceeded)
        );
    }

    #[test]
    fn zero_width_fvt_expects_successor() {
        let mut s = FreshnessState::new(id(), 16, 0).unwrap();
        assert_eq!(s.retry_window(), 1);
        s.latest_received = 41;
        assert_eq!(
            reconstruct_fvv(&s, &BitString::empty()).unwrap().counter(),
            42
        );
    }

    #[test]
    fn commit_and_replay() {
        let mut s = rx(0x0005, None);
        let fvv = reconstruct_fvv(&s, &fvt(0x06)).unwrap();
        commit_fv(&mut s, &fvv).unwrap();
        assert_eq!(s.latest_received(), 6);
        // Re-presenting the same FVT can only map to a later counter.
        match reconstruct_fvv(&s, &fvt(0x06)) {
            Ok(v) => assert!(v.counter() >= 0x106),
            Err(e) => assert_eq!(e, FreshnessError::WindowExceeded),
        }
        assert!(matches!(
            commit_fv(&mut s, &fvv),
            Err(FreshnessError::StaleCommit { .. })
        ));
    }

    #[test]
    fn full_width_fvt_uses_value_directly() {
        let mut s = FreshnessState::new(id(), 16, 16).unwrap();
        s.latest_received = 10;
        let v = reconstruct_fvv(&s, &BitString::new(500, 16).unwrap()).unwrap();
        assert_eq!(v.counter(), 500);
        assert_eq!(
            reconstruct_fvv(&s, &BitString::new(10, 16).unwrap()),
            Err(FreshnessError::WindowExceeded)
        );
    }
}
