//! Classic CAN base frames (11-bit identifiers, up to 8 data bytes).

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_STANDARD_ID: u16 = 0x7FF;
pub const MAX_DLC: u8 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("CAN identifier {0:#x} exceeds 11 bits")]
    IdOutOfRange(u32),
    #[error("data length {0} exceeds 8 bytes")]
    TooLong(usize),
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct CanId(u16);

impl CanId {
    pub fn new(raw: u32) -> Result<Self, FrameError> {
        if raw > u32::from(MAX_STANDARD_ID) {
            return Err(FrameError::IdOutOfRange(raw));
        }
        Ok(CanId(raw as u16))
    }

    pub fn raw(self) -> u16 {
        self.0
    }
}

impl TryFrom<u32> for CanId {
    type Error = FrameError;

    fn try_from(raw: u32) -> Result<Self, Self::Error> {
        CanId::new(raw)
    }
}

impl From<CanId> for u32 {
    fn from(id: CanId) -> u32 {
        u32::from(id.0)
    }
}

impl fmt::Debug for CanId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CanId({:03X})", self.0)
    }
}

impl fmt::Display for CanId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:03X}", self.0)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct CanFrame {
    id: CanId,
    dlc: u8,
    data: [u8; 8],
}

impl CanFrame {
    pub fn new(id: CanId, data: &[u8]) -> Result<Self, FrameError> {
        if data.len() > usize::from(MAX_DLC) {
            return Err(FrameError::TooLong(data.len()));
        }
        let mut buf = [0u8; 8];
        buf[..data.len()].copy_from_slice(data);
        Ok(CanFrame {
            id,
            dlc: data.len() as u8,
            data: buf,
        })
    }

    pub fn from_data_field(id: CanId, data: [u8; 8]) -> Self {
        CanFrame { id, dlc: 8, data }
    }

    pub fn id(&self) -> CanId {
        self.id
    }

    pub fn dlc(&self) -> u8 {
        self.dlc
    }

    pub fn data(&self) -> &[u8] {
        &self.data[..usize::from(self.dlc)]
    }

    /// The 8-byte data field, if the frame carries one.
    pub fn data_field(&self) -> Option<[u8; 8]> {
        (self.dlc == 8).then_some(self.data)
    }

    pub fn with_id(mut self, id: CanId) -> Self {
        self.id = id;
        self
    }

    /// Flips bit `bit` of the data field, counting MSB-first from byte 0.
    pub fn flip_bit(mut self, bit: usize) -> Self {
        assert!(
            bit < usize::from(self.dlc) * 8,
            "bit {bit} outside the data field"
        );
        self.data[bit / 8] ^= 0x80 >> (bit % 8);
        self
    }
}

impl fmt::Debug for CanFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "CanFrame({}#{})",
            self.id,
            hex::encode_upper(self.data())
        )
    }
}

impl fmt::Display for CanFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.id, hex::encode_upper(self.data()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn id_range() {
        assert!(CanId::new(0x7FF).is_ok());
        assert_eq!(CanId::new(0x800), Err(FrameError::IdOutOfRange(0x800)));
    }

    #[test]
    fn data_length() {
        let id = CanId::new(0x123).unwrap();
        let f = CanFrame::new(id, &[0xDE, 0xAD]).unwrap();
        assert_eq!(f.dlc(), 2);
        assert_eq!(f.data(), &[0xDE, 0xAD]);
        assert_eq!(f.data_field(), None);
        assert_eq!(CanFrame::new(id, &[0; 9]), Err(FrameError::TooLong(9)));
    }

    #[test]
    fn flip_bit_is_msb_first() {
        let f = CanFrame::from_data_field(CanId::new(1).unwrap(), [0; 8]);
        assert_eq!(f.flip_bit(0).data()[0], 0x80);
        assert_eq!(f.flip_bit(63).data()[7], 0x01);
    }
}
