//! Authenticated and encrypted classic CAN frames.
//!
//! Each 8-byte data field carries `payload ‖ FVT ‖ MACT` encrypted as one
//! SPECK64/128 block, where the MACT is a truncated Chaskey tag over the
//! payload and the full freshness value. Profiles choose the field widths.

pub mod attack;
pub mod bench;
pub mod bits;
pub mod can;
pub mod candump;
pub mod codec;
pub mod crypto;
pub mod freshness;
pub mod keystore;
pub mod profile;
pub mod sim;
