//! HSM-like key store.
//!
//! Keys are provisioned once, addressed by [`KeyId`], and bound to CAN
//! identifiers through [`ChannelKeys`]. Callers get MACs and cipher blocks
//! computed on their behalf; no method returns key material, and `Debug`
//! output lists identifiers only.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::can::CanId;
use crate::crypto::{Block64, Chaskey, CipherKey128, KeySchedule, MacKey128, Tag128};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KeyStoreError {
    #[error("key store already initialized")]
    DoubleInit,
    #[error("key store not initialized")]
    Uninitialized,
    #[error("channel {can_id} references unknown key id `{key_id}`")]
    DanglingKeyId { can_id: CanId, key_id: KeyId },
    #[error("key id `{0}` provisioned twice")]
    DuplicateKeyId(KeyId),
    #[error("channel {0} provisioned twice")]
    DuplicateChannel(CanId),
    #[error("channel {0} uses the same key id for MAC and encryption")]
    SharedKeyId(CanId),
    #[error("no keys bound to CAN id {0}")]
    UnknownChannel(CanId),
    #[error("key `{key_id}`: {message}")]
    BadKeyMaterial { key_id: KeyId, message: String },
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KeyId(String);

impl KeyId {
    pub fn new(id: impl Into<String>) -> Self {
        KeyId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for KeyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "KeyId({})", self.0)
    }
}

impl fmt::Display for KeyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelKeys {
    pub can_id: CanId,
    pub mac_key: KeyId,
    pub enc_key: KeyId,
}

/// Secret key material awaiting provisioning.
#[derive(Clone)]
pub struct KeyMaterial([u8; 16]);

impl KeyMaterial {
    pub fn new(bytes: [u8; 16]) -> Self {
        KeyMaterial(bytes)
    }

    pub fn from_hex(text: &str) -> Result<Self, hex::FromHexError> {
        let mut bytes = [0u8; 16];
        hex::decode_to_slice(text.trim(), &mut bytes)?;
        Ok(KeyMaterial(bytes))
    }
}

impl fmt::Debug for KeyMaterial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("KeyMaterial(<redacted>)")
    }
}

/// One provisioning batch: keys plus channel bindings.
#[derive(Debug, Clone, Default)]
pub struct Provisioning {
    pub keys: Vec<(KeyId, KeyMaterial)>,
    pub channels: Vec<ChannelKeys>,
}

/// The on-disk form of a provisioning batch (the `[[keys]]` and
/// `[[channels]]` tables of key files and scenario files). Test fixtures
/// only: keys are stored in the clear as hex.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProvisioningFile {
    #[serde(default)]
    pub keys: Vec<KeyEntry>,
    #[serde(default)]
    pub channels: Vec<ChannelKeys>,
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeyEntry {
    pub id: KeyId,
    pub material: String,
}

impl fmt::Debug for KeyEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "KeyEntry({})", self.id)
    }
}

impl ProvisioningFile {
    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_provisioning(&self) -> Result<Provisioning, KeyStoreError> {
        let keys = self
            .keys
            .iter()
            .map(|k| {
                KeyMaterial::from_hex(&k.material)
                    .map(|m| (k.id.clone(), m))
                    .map_err(|e| KeyStoreError::BadKeyMaterial {
                        key_id: k.id.clone(),
                        message: e.to_string(),
                    })
            })
            .collect::<Result<_, _>>()?;
        Ok(Provisioning {
            keys,
            channels: self.channels.clone(),
        })
    }
}

struct ChannelCrypto {
    binding: ChannelKeys,
    mac: Chaskey,
    cipher: KeySchedule,
}

#[derive(Default)]
pub struct KeyStore {
    channels: HashMap<CanId, ChannelCrypto>,
    initialized: bool,
}

impl fmt::Debug for KeyStore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bindings: BTreeMap<_, _> = self
            .channels
            .iter()
            .map(|(id, c)| (*id, (&c.binding.mac_key, &c.binding.enc_key)))
            .collect();
        f.debug_struct("KeyStore")
            .field("initialized", &self.initialized)
            .field("channels", &bindings)
            .finish()
    }
}

impl KeyStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads every binding or none of them.
    pub fn initialize(&mut self, provisioning: Provisioning) -> Result<(), KeyStoreError> {
        if self.initialized {
            return Err(KeyStoreError::DoubleInit);
        }
        let mut keys: HashMap<KeyId, KeyMaterial> = HashMap::new();
        for (id, material) in provisioning.keys {
            if keys.contains_key(&id) {
                return Err(KeyStoreError::DuplicateKeyId(id));
            }
            keys.insert(id, material);
        }

        let mut channels = HashMap::new();
        for binding in provisioning.channels {
            if binding.mac_key == binding.enc_key {
                return Err(KeyStoreError::SharedKeyId(binding.can_id));
            }
            let lookup = |key_id: &KeyId| {
                keys.get(key_id)
                    .ok_or_else(|| KeyStoreError::DanglingKeyId {
                        can_id: binding.can_id,
                        key_id: key_id.clone(),
                    })
            };
            let mac = Chaskey::new(&MacKey128::from_bytes(lookup(&binding.mac_key)?.0));
            let cipher = crate::crypto::speck_key_schedule(&CipherKey128::from_bytes(
                lookup(&binding.enc_key)?.0,
            ));
            let can_id = binding.can_id;
            if channels
                .insert(
                    can_id,
                    ChannelCrypto {
                        binding,
                        mac,
                        cipher,
                    },
                )
                .is_some()
            {
                return Err(KeyStoreError::DuplicateChannel(can_id));
            }
        }

        self.channels = channels;
        self.initialized = true;
        Ok(())
    }

    pub fn is_initialized(&self) -> bool {
        self.initialized
    }

    fn channel(&self, can_id: CanId) -> Result<&ChannelCrypto, KeyStoreError> {
        if !self.initialized {
            return Err(KeyStoreError::Uninitialized);
        }
        self.channels
            .get(&can_id)
            .ok_or(KeyStoreError::UnknownChannel(can_id))
    }

    pub fn binding(&self, can_id: CanId) -> Result<&ChannelKeys, KeyStoreError> {
        self.channel(can_id).map(|c| &c.binding)
    }

    pub fn has_channel(&self, can_id: CanId) -> bool {
        self.channel(can_id).is_ok()
    }

    pub fn channel_ids(&self) -> Vec<CanId> {
        let mut ids: Vec<_> = self.channels.keys().copied().collect();
        ids.sort();
        ids
    }

    pub fn mac_for(&self, can_id: CanId, message: &[u8]) -> Result<Tag128, KeyStoreError> {
        Ok(self.channel(can_id)?.mac.mac(message))
    }

    pub fn encrypt_for(&self, can_id: CanId, block: Block64) -> Result<Block64, KeyStoreError> {
        Ok(self.channel(can_id)?.cipher.encrypt(block))
    }

    pub fn decrypt_for(&self, can_id: CanId, block: Block64) -> Result<Block64, KeyStoreError> {
        Ok(self.channel(can_id)?.cipher.decrypt(block))
    }
}
