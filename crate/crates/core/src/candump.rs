//! candump log lines: `(<seconds>.<fraction>) <iface> <ID>#<DATA>`.
//!
//! Only classic frames with 3-digit-or-shorter hex identifiers up to
//! `7FF` are accepted. Lines are emitted with six fractional digits, an
//! upper-case 3-digit identifier and upper-case data.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::can::{CanFrame, CanId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CandumpError {
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("invalid timestamp `{0}`")]
    InvalidTimestamp(String),
    #[error("invalid interface name")]
    InvalidInterface,
    #[error("invalid frame `{0}`")]
    InvalidFrame(String),
    #[error("identifier `{0}` is not an 11-bit hex id")]
    InvalidId(String),
    #[error("unexpected trailing text `{0}`")]
    TrailingText(String),
}

/// Seconds plus microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Timestamp {
    pub secs: u64,
    pub micros: u32,
}

impl Timestamp {
    pub fn from_micros(total: u64) -> Self {
        Timestamp {
            secs: total / 1_000_000,
            micros: (total % 1_000_000) as u32,
        }
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:06}", self.secs, self.micros)
    }
}

impl FromStr for Timestamp {
    type Err = CandumpError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CandumpError::InvalidTimestamp(s.to_string());
        let (secs, frac) = s.split_once('.').ok_or_else(bad)?;
        let all_digits = |t: &str| !t.is_empty() && t.bytes().all(|b| b.is_ascii_digit());
        if !all_digits(secs) || !all_digits(frac) || frac.len() > 6 {
            return Err(bad());
        }
        let secs = secs.parse().map_err(|_| bad())?;
        let micros = format!("{frac:0<6}").parse().map_err(|_| bad())?;
        Ok(Timestamp { secs, micros })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandumpRecord {
    pub timestamp: Timestamp,
    pub interface: String,
    pub frame: CanFrame,
}

impl fmt::Display for CandumpRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) {} {}", self.timestamp, self.interface, self.frame)
    }
}

pub fn parse_candump_line(line: &str) -> Result<CandumpRecord, CandumpError> {
    let mut fields = line.split_whitespace();

    let ts = fields
        .next()
        .ok_or(CandumpError::MissingField("timestamp"))?;
    let ts = ts
        .strip_prefix('(')
        .and_then(|t| t.strip_suffix(')'))
        .ok_or_else(|| CandumpError::InvalidTimestamp(ts.to_string()))?;
    let timestamp = ts.parse()?;

    let interface = fields
        .next()
        .ok_or(CandumpError::MissingField("interface"))?;
    if interface.contains(['#', '(', ')']) {
        return Err(CandumpError::InvalidInterface);
    }

    let raw = fields.next().ok_or(CandumpError::MissingField("frame"))?;
    if let Some(extra) = fields.next() {
        return Err(CandumpError::TrailingText(extra.to_string()));
    }
    let (id_text, data_text) = raw
        .split_once('#')
        .ok_or_else(|| CandumpError::InvalidFrame(raw.to_string()))?;

    if id_text.is_empty() || id_text.len() > 3 || !id_text.bytes().all(|b| b.is_ascii_hexdigit()) {
        return Err(CandumpError::InvalidId(id_text.to_string()));
    }
    let id = u32::from_str_radix(id_text, 16)
        .ok()
        .and_then(|v| CanId::new(v).ok())
        .ok_or_else(|| CandumpError::InvalidId(id_text.to_string()))?;

    let data = hex::decode(data_text).map_err(|_| CandumpError::InvalidFrame(raw.to_string()))?;
    let frame =
        CanFrame::new(id, &data).map_err(|_| CandumpError::InvalidFrame(raw.to_string()))?;

    Ok(CandumpRecord {
        timestamp,
        interface: interface.to_string(),
        frame,
    })
}
