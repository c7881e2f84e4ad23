//! Security profiles: the parameter set fixing algorithms and field widths,
//! and the 64-bit data field layout each valid profile induces.
//!
//! Profile documents are line-oriented `key = value` UTF-8 text:
//!
//! ```text
//! name = profile-1
//! algorithmFamily = Chaskey
//! algorithmMode = Chaskey_MAC
//! algorithmSecondaryFamily = not set
//! SecOCFreshnessValueLength = not set
//! SecOCFreshnessValueTruncLength = not set
//! SecOCAuthInfoTruncLength = 24 bit
//! algorithmFreshnessValue = not set
//! algorithmEncryption = SPECK64/128
//! ```
//!
//! Optional parameters may be omitted or given as `not set`. Lengths accept
//! a trailing `bit`/`bits` unit. `#` starts a comment.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DATA_FIELD_BITS: u32 = 64;
pub const MIN_PAYLOAD_BITS: u32 = 8;
pub const MAX_FRESHNESS_BITS: u32 = 64;

pub const FAMILY_CHASKEY: &str = "Chaskey";
pub const MODE_CHASKEY_MAC: &str = "Chaskey_MAC";
pub const ENC_SPECK64_128: &str = "SPECK64/128";
pub const ENC_NONE: &str = "none";
pub const FV_MONOTONIC_COUNTER: &str = "MonotonicCounter";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProfileError {
    #[error("fields need {needed} bits of payload/FVT/MACT but only {available} fit with an {min}-bit minimum payload", min = MIN_PAYLOAD_BITS)]
    LayoutOverflow { needed: u32, available: u32 },
    #[error("unsupported {parameter} `{value}`")]
    UnknownAlgorithm {
        parameter: &'static str,
        value: String,
    },
    #[error("inconsistent freshness parameters: {0}")]
    InconsistentFreshness(String),
    #[error("authInfoTruncLength must be a positive multiple of 8 bits, got {0}")]
    UnalignedTagLength(u32),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// The profile parameter set. Field names serialize to the canonical
/// parameter names; the SecOC-prefixed spellings are accepted as aliases.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecurityProfile {
    pub name: String,
    #[serde(rename = "algorithmFamily", default)]
    pub algorithm_family: Option<String>,
    #[serde(rename = "algorithmMode", default)]
    pub algorithm_mode: Option<String>,
    #[serde(rename = "algorithmSecondaryFamily", default)]
    pub algorithm_secondary_family: Option<String>,
    #[serde(
        rename = "authInfoTruncLength",
        alias = "authInfoTxLength",
        alias = "SecOCAuthInfoTruncLength"
    )]
    pub auth_info_trunc_length: u32,
    #[serde(
        rename = "freshnessValueLength",
        alias = "SecOCFreshnessValueLength",
        default
    )]
    pub freshness_value_length: Option<u32>,
    #[serde(
        rename = "freshnessValueTruncLength",
        alias = "SecOCFreshnessValueTruncLength",
        default
    )]
    pub freshness_value_trunc_length: Option<u32>,
    #[serde(rename = "algorithmFreshnessValue", default)]
    pub algorithm_freshness_value: Option<String>,
    #[serde(rename = "algorithmEncryption", default)]
    pub algorithm_encryption: Option<String>,
}

/// Bit widths of the three data field sections, in wire order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FrameLayout {
    pub payload_bits: u32,
    pub fvt_bits: u32,
    pub mact_bits: u32,
}

impl FrameLayout {
    pub fn total(&self) -> u32 {
        self.payload_bits + self.fvt_bits + self.mact_bits
    }

    /// Whole bytes needed to carry the payload outside the secured field.
    pub fn payload_bytes(&self) -> usize {
        self.payload_bits.div_ceil(8) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Encryption {
    Speck64_128,
    None,
}

fn same(a: &str, b: &str) -> bool {
    a.trim().eq_ignore_ascii_case(b)
}

impl SecurityProfile {
    pub fn validate(&self) -> Result<FrameLayout, ProfileError> {
        self.check_algorithms()?;

        let mact = self.auth_info_trunc_length;
        if mact == 0 || !mact.is_multiple_of(8) {
            return Err(ProfileError::UnalignedTagLength(mact));
        }

        let fvt = match (
            self.freshness_value_length,
            self.freshness_value_trunc_length,
        ) {
            (None, None) => 0,
            (None, Some(_)) => {
                return Err(ProfileError::InconsistentFreshness(
                    "freshnessValueTruncLength set without freshnessValueLength".into(),
                ))
            }
            (Some(0), _) => {
                return Err(ProfileError::InconsistentFreshness(
                    "freshnessValueLength must be positive".into(),
                ))
            }
            (Some(len), _) if len > MAX_FRESHNESS_BITS => {
                return Err(ProfileError::InconsistentFreshness(format!(
                    "freshnessValueLength {len} exceeds {MAX_FRESHNESS_BITS} bits"
                )))
            }
            (Some(len), Some(trunc)) if trunc > len => {
                return Err(ProfileError::InconsistentFreshness(format!(
                    "freshnessValueTruncLength {trunc} exceeds freshnessValueLength {len}"
                )))
            }
            (Some(_), trunc) => trunc.unwrap_or(0),
        };

        let needed = mact + fvt;
        let available = DATA_FIELD_BITS - MIN_PAYLOAD_BITS;
        if needed > available {
            return Err(ProfileError::LayoutOverflow { needed, available });
        }
        Ok(FrameLayout {
            payload_bits: DATA_FIELD_BITS - needed,
            fvt_bits: fvt,
            mact_bits: mact,
        })
    }

    fn check_algorithms(&self) -> Result<(), ProfileError> {
        if let Some(family) = &self.algorithm_family {
            if !same(family, FAMILY_CHASKEY) {
                return Err(ProfileError::UnknownAlgorithm {
                    parameter: "algorithmFamily",
                    value: family.clone(),
                });
            }
        }
        if let Some(mode) = &self.algorithm_mode {
            if !same(mode, MODE_CHASKEY_MAC) {
                return Err(ProfileError::UnknownAlgorithm {
                    parameter: "algorithmMode",
                    value: mode.clone(),
                });
            }
        }
        if let Some(fv) = &self.algorithm_freshness_value {
            if !same(fv, FV_MONOTONIC_COUNTER) {
                return Err(ProfileError::UnknownAlgorithm {
                    parameter: "algorithmFreshnessValue",
                    value: fv.clone(),
                });
            }
        }
        self.encryption().map(|_| ())
    }

    /// Absent `algorithmEncryption` means no encryption stage.
    pub fn encryption(&self) -> Result<Encryption, ProfileError> {
        match self.algorithm_encryption.as_deref() {
            None => Ok(Encryption::None),
            Some(e) if same(e, ENC_NONE) => Ok(Encryption::None),
            Some(e) if same(e, ENC_SPECK64_128) => Ok(Encryption::Speck64_128),
            Some(e) => Err(ProfileError::UnknownAlgorithm {
                parameter: "algorithmEncryption",
                value: e.to_string(),
            }),
        }
    }

    pub fn uses_freshness(&self) -> bool {
        self.freshness_value_length.is_some()
    }

    /// Renders the profile as a config document using canonical keys.
    pub fn to_config_string(&self) -> String {
        fn opt_str(v: &Option<String>) -> &str {
            v.as_deref().unwrap_or("not set")
        }
        fn opt_len(v: Option<u32>) -> String {
            v.map_or_else(|| "not set".to_string(), |n| n.to_string())
        }
        let mut s = String::new();
        let _ = writeln!(s, "name = {}", self.name);
        let _ = writeln!(s, "algorithmFamily = {}", opt_str(&self.algorithm_family));
        let _ = writeln!(s, "algorithmMode = {}", opt_str(&self.algorithm_mode));
        let _ = writeln!(
            s,
            "algorithmSecondaryFamily = {}",
            opt_str(&self.algorithm_secondary_family)
        );
        let _ = writeln!(s, "authInfoTruncLength = {}", self.auth_info_trunc_length);
        let _ = writeln!(
            s,
            "freshnessValueLength = {}",
            opt_len(self.freshness_value_length)
        );
        let _ = writeln!(
            s,
            "freshnessValueTruncLength = {}",
            opt_len(self.freshness_value_trunc_length)
        );
        let _ = writeln!(
            s,
            "algorithmFreshnessValue = {}",
            opt_str(&self.algorithm_freshness_value)
        );
        let _ = writeln!(
            s,
            "algorithmEncryption = {}",
            opt_str(&self.algorithm_encryption)
        );
        s
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Key {
    Name,
    Family,
    Mode,
    SecondaryFamily,
    AuthLength,
    FvLength,
    FvTruncLength,
    FvAlgorithm,
    Encryption,
}

fn key_for(name: &str) -> Option<Key> {
    Some(match name {
        "name" => Key::Name,
        "algorithmFamily" => Key::Family,
        "algorithmMode" => Key::Mode,
        "algorithmSecondaryFamily" => Key::SecondaryFamily,
        "authInfoTruncLength" | "authInfoTxLength" | "SecOCAuthInfoTruncLength" => Key::AuthLength,
        "freshnessValueLength" | "SecOCFreshnessValueLength" => Key::FvLength,
        "freshnessValueTruncLength" | "SecOCFreshnessValueTruncLength" => Key::FvTruncLength,
        "algorithmFreshnessValue" => Key::FvAlgorithm,
        "algorithmEncryption" => Key::Encryption,
        _ => return None,
    })
}

fn parse_bits(value: &str, line: usize) -> Result<u32, ProfileError> {
    let digits = value
        .strip_suffix("bits")
        .or_else(|| value.strip_suffix("bit"))
        .unwrap_or(value)
        .trim();
    digits.parse::<u32>().map_err(|_| ProfileError::Parse {
        line,
        message: format!("`{value}` is not a bit length"),
    })
}

/// Parses and validates a profile document.
pub fn load_profile(text: &str) -> Result<SecurityProfile, ProfileError> {
    let mut values: HashMap<Key, (usize, String)> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (k, v) = content.split_once('=').ok_or_else(|| ProfileError::Parse {
            line,
            message: "expected `key = value`".into(),
        })?;
        let (k, v) = (k.trim(), v.trim());
        let key = key_for(k).ok_or_else(|| ProfileError::Parse {
            line,
            message: format!("unknown parameter `{k}`"),
        })?;
        if values.insert(key, (line, v.to_string())).is_some() {
            return Err(ProfileError::Parse {
                line,
                message: format!("parameter `{k}` given twice"),
            });
        }
    }

    let text_opt = |key: Key| -> Option<String> {
        values
            .get(&key)
            .map(|(_, v)| v.clone())
            .filter(|v| !v.eq_ignore_ascii_case("not set") && !v.is_empty())
    };
    let len_opt = |key: Key| -> Result<Option<u32>, ProfileError> {
        match values.get(&key) {
            Some((line, v)) if !v.eq_ignore_ascii_case("not set") && !v.is_empty() => {
                parse_bits(v, *line).map(Some)
            }
            _ => Ok(None),
        }
    };

    let auth = len_opt(Key::AuthLength)?.ok_or(ProfileError::Parse {
        line: text.lines().count().max(1),
        message: "missing mandatory authInfoTruncLength".into(),
    })?;

    let profile = SecurityProfile {
        name: text_opt(Key::Name).unwrap_or_else(|| "unnamed".into()),
        algorithm_family: text_opt(Key::Family),
        algorithm_mode: text_opt(Key::Mode),
        algorithm_secondary_family: text_opt(Key::SecondaryFamily),
        auth_info_trunc_length: auth,
        freshness_value_length: len_opt(Key::FvLength)?,
        freshness_value_trunc_length: len_opt(Key::FvTruncLength)?,
        algorithm_freshness_value: text_opt(Key::FvAlgorithm),
        algorithm_encryption: text_opt(Key::Encryption),
    };
    profile.validate()?;
    Ok(profile)
}

/// Example profile: Chaskey MAC truncated to 24 bits, SPECK64/128, no
/// freshness. Induces a 40/0/24 layout.
pub fn builtin_profile_1() -> SecurityProfile {
    SecurityProfile {
        name: "profile-1".into(),
        algorithm_family: Some(FAMILY_CHASKEY.into()),
        algorithm_mode: Some(MODE_CHASKEY_MAC.into()),
        algorithm_secondary_family: None,
        auth_info_trunc_length: 24,
        freshness_value_length: None,
        freshness_value_trunc_length: None,
        algorithm_freshness_value: None,
        algorithm_encryption: Some(ENC_SPECK64_128.into()),
    }
}

/// `profile-1` with the encryption stage disabled: an authentication-only
/// secured PDU.
pub fn builtin_profile_secoc_baseline() -> SecurityProfile {
    SecurityProfile {
        name: "secoc-baseline".into(),
        algorithm_encryption: Some(ENC_NONE.into()),
        ..builtin_profile_1()
    }
}

/// `profile-1` plus a 32-bit monotonic counter with 8 bits on the wire
/// (32/8/24 layout).
pub fn builtin_profile_1_fv() -> SecurityProfile {
    SecurityProfile {
        name: "profile-1-fv".into(),
        freshness_value_length: Some(32),
        freshness_value_trunc_length: Some(8),
        algorithm_freshness_value: Some(FV_MONOTONIC_COUNTER.into()),
        ..builtin_profile_1()
    }
}

/// Freshness-enabled authentication-only profile (32/8/24 layout).
pub fn builtin_profile_secoc_fv() -> SecurityProfile {
    SecurityProfile {
        name: "secoc-baseline-fv".into(),
        algorithm_encryption: Some(ENC_NONE.into()),
        ..builtin_profile_1_fv()
    }
}

pub fn builtin_profiles() -> Vec<SecurityProfile> {
    vec![
        builtin_profile_1(),
        builtin_profile_secoc_baseline(),
        builtin_profile_1_fv(),
        builtin_profile_secoc_fv(),
    ]
}

pub fn builtin_profile(name: &str) -> Option<SecurityProfile> {
    builtin_profiles().into_iter().find(|p| p.name == name)
}

/// A profile that passed validation, with its derived layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidatedProfile {
    profile: SecurityProfile,
    layout: FrameLayout,
    encryption: Encryption,
}

impl ValidatedProfile {
    pub fn new(profile: SecurityProfile) -> Result<Self, ProfileError> {
        let layout = profile.validate()?;
        let encryption = profile.encryption()?;
        Ok(ValidatedProfile {
            profile,
            layout,
            encryption,
        })
    }

    pub fn profile(&self) -> &SecurityProfile {
        &self.profile
    }

    pub fn name(&self) -> &str {
        &self.profile.name
    }

    pub fn layout(&self) -> FrameLayout {
        self.layout
    }

    pub fn encryption(&self) -> Encryption {
        self.encryption
    }

    pub fn encrypts(&self) -> bool {
        self.encryption == Encryption::Speck64_128
    }

    /// Full freshness value width, or `None` when the profile has no FV.
    pub fn freshness_bits(&self) -> Option<u32> {
        self.profile.freshness_value_length
    }
}

/// Named profiles. Built-ins are always present.
#[derive(Debug, Clone)]
pub struct ProfileRegistry {
    profiles: HashMap<String, ValidatedProfile>,
}

impl Default for ProfileRegistry {
    fn default() -> Self {
        let profiles = builtin_profiles()
            .into_iter()
            .map(|p| {
                let v = ValidatedProfile::new(p).expect("built-in profiles validate");
                (v.name().to_string(), v)
            })
            .collect();
        ProfileRegistry { profiles }
    }
}

impl ProfileRegistry {
    /// Adds or replaces a profile after validating it.
    pub fn insert(&mut self, profile: SecurityProfile) -> Result<(), ProfileError> {
        let v = ValidatedProfile::new(profile)?;
        self.profiles.insert(v.name().to_string(), v);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&ValidatedProfile> {
        self.profiles.get(name)
    }
}
