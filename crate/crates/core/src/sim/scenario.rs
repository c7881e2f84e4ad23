//! Scenario files (TOML) and the scenario runner.
//!
//! ```toml
//! seed = 7
//! interface = "vcan0"          # optional
//!
//! [[profiles]]                 # optional; built-in names are always known
//! name = "fv16"
//! authInfoTruncLength = 24
//! freshnessValueLength = 16
//! freshnessValueTruncLength = 8
//! algorithmEncryption = "SPECK64/128"
//!
//! [[keys]]
//! id = "mac-100"
//! material = "000102030405060708090a0b0c0d0e0f"
//!
//! [[channels]]
//! can_id = 0x100
//! mac_key = "mac-100"
//! enc_key = "enc-100"
//!
//! [[nodes]]
//! id = "engine"
//! role = "sender"              # sender | receiver | gateway
//! profile = "fv16"             # profile name, or "plain"
//! channels = [0x100]           # channel keys provisioned into this node
//! subscribe = []               # identifiers this node verifies
//! routes = []                  # gateways: [{ from = 0x100, to = 0x200 }]
//! fast_path = false            # gateways: forward without verifying
//! retry_window = 255           # optional receive-window override
//!
//! [[traffic]]
//! node = "engine"
//! can_id = 0x100
//! start = 0                    # first tick
//! period = 10                  # ticks between frames
//! count = 100
//! payload = "random"           # or a hex payload of the profile's width
//!
//! [[drops]]                    # frames lost at one node
//! node = "dash"
//! tick = 30
//! can_id = 0x100               # optional
//!
//! [[attacks]]
//! kind = "replay"              # replay | inject | tamper | fuzz
//! tick = 500
//! can_id = 0x100
//! index = 3                    # optional; default: latest frame seen
//! ```
//!
//! `inject` takes `data = "<hex>"`; `tamper` takes `bit = <n>` and replaces
//! the next transmission on `can_id` at or after `tick` with a copy whose
//! data bit `n` is flipped; `fuzz` takes `count` and optional `can_ids`.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Bus, BusEvent, EcuNode, Protection, Role, SimError, TraceLog, ATTACKER};
use crate::bits::BitString;
use crate::can::{CanFrame, CanId};
use crate::keystore::{ChannelKeys, KeyEntry, KeyId, KeyMaterial, KeyStore, Provisioning};
use crate::profile::{ProfileRegistry, SecurityProfile};

pub const PLAIN_PROFILE: &str = "plain";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub seed: u64,
    #[serde(default = "default_interface")]
    pub interface: String,
    #[serde(default)]
    pub profiles: Vec<SecurityProfile>,
    #[serde(default)]
    pub keys: Vec<KeyEntry>,
    #[serde(default)]
    pub channels: Vec<ChannelKeys>,
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub traffic: Vec<TrafficSpec>,
    #[serde(default)]
    pub drops: Vec<DropRule>,
    #[serde(default)]
    pub attacks: Vec<AttackStep>,
}

fn default_interface() -> String {
    "vcan0".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub id: String,
    pub role: Role,
    pub profile: String,
    #[serde(default)]
    pub channels: Vec<CanId>,
    #[serde(default)]
    pub subscribe: Vec<CanId>,
    #[serde(default)]
    pub routes: Vec<RouteSpec>,
    #[serde(default)]
    pub fast_path: bool,
    #[serde(default)]
    pub retry_window: Option<u64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouteSpec {
    pub from: CanId,
    pub to: CanId,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum PayloadSpec {
    #[default]
    Random,
    Hex(String),
}

impl From<String> for PayloadSpec {
    fn from(s: String) -> Self {
        if s.eq_ignore_ascii_case("random") {
            PayloadSpec::Random
        } else {
            PayloadSpec::Hex(s)
        }
    }
}

impl From<PayloadSpec> for String {
    fn from(p: PayloadSpec) -> String {
        match p {
            PayloadSpec::Random => "random".into(),
            PayloadSpec::Hex(h) => h,
        }
    }
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficSpec {
    pub node: String,
    pub can_id: CanId,
    #[serde(default)]
    pub start: u64,
    #[serde(default = "one")]
    pub period: u64,
    #[serde(default = "one")]
    pub count: u64,
    #[serde(default)]
    pub payload: PayloadSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DropRule {
    pub node: String,
    pub tick: u64,
    #[serde(default)]
    pub can_id: Option<CanId>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum AttackStep {
    Replay {
        tick: u64,
        can_id: CanId,
        #[serde(default)]
        index: Option<usize>,
    },
    Inject {
        tick: u64,
        can_id: CanId,
        data: String,
    },
    Tamper {
        tick: u64,
        can_id: CanId,
        bit: usize,
    },
    Fuzz {
        tick: u64,
        count: u64,
        #[serde(default)]
        can_ids: Vec<CanId>,
    },
}

impl AttackStep {
    fn tick(&self) -> u64 {
        match self {
            AttackStep::Replay { tick, .. }
            | AttackStep::Inject { tick, .. }
            | AttackStep::Tamper { tick, .. }
            | AttackStep::Fuzz { tick, .. } => *tick,
        }
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        toml::from_str(text).map_err(|e| SimError::ScenarioInvalid(e.to_string()))
    }
}

fn invalid(msg: impl Into<String>) -> SimError {
    SimError::ScenarioInvalid(msg.into())
}

enum Action {
    Transmit {
        node: usize,
        can_id: CanId,
        payload: Option<BitString>,
    },
    Replay {
        can_id: CanId,
        index: Option<usize>,
    },
    Inject {
        frame: CanFrame,
    },
    Tamper {
        can_id: CanId,
        bit: usize,
    },
    Fuzz {
        count: u64,
        can_ids: Vec<CanId>,
    },
}

fn build_nodes(s: &Scenario) -> Result<Vec<EcuNode>, SimError> {
    let mut registry = ProfileRegistry::default();
    for p in &s.profiles {
        registry
            .insert(p.clone())
            .map_err(|e| invalid(format!("profile `{}`: {e}", p.name)))?;
    }

    let mut materials: HashMap<&KeyId, &KeyEntry> = HashMap::new();
    for k in &s.keys {
        if materials.insert(&k.id, k).is_some() {
            return Err(invalid(format!("key `{}` defined twice", k.id)));
        }
    }
    let mut channels: BTreeMap<CanId, &ChannelKeys> = BTreeMap::new();
    for c in &s.channels {
        if channels.insert(c.can_id, c).is_some() {
            return Err(invalid(format!("channel {} defined twice", c.can_id)));
        }
    }

    let mut seen = BTreeSet::new();
    let mut nodes = Vec::new();
    for spec in &s.nodes {
        if spec.id == ATTACKER || !seen.insert(spec.id.as_str()) {
            return Err(invalid(format!(
                "node id `{}` is reserved or duplicated",
                spec.id
            )));
        }
        let protection = if spec.profile == PLAIN_PROFILE {
            Protection::Plain
        } else {
            let p = registry.get(&spec.profile).ok_or_else(|| {
                invalid(format!(
                    "node `{}`: unknown profile `{}`",
                    spec.id, spec.profile
                ))
            })?;
            Protection::Secured(p.clone())
        };

        let mut keys = KeyStore::new();
        if let Protection::Secured(_) = protection {
            if spec.channels.is_empty() {
                return Err(invalid(format!(
                    "node `{}` has no provisioned channels",
                    spec.id
                )));
            }
            let mut prov = Provisioning::default();
            let mut added = BTreeSet::new();
            for can_id in &spec.channels {
                let binding = channels
                    .get(can_id)
                    .ok_or_else(|| invalid(format!("node `{}`: no channel {can_id}", spec.id)))?;
                for key_id in [&binding.mac_key, &binding.enc_key] {
                    if added.insert(key_id.clone()) {
                        let entry = materials.get(key_id).ok_or_else(|| {
                            invalid(format!("channel {can_id}: unknown key `{key_id}`"))
                        })?;
                        let material = KeyMaterial::from_hex(&entry.material)
                            .map_err(|e| invalid(format!("key `{key_id}`: {e}")))?;
                        prov.keys.push((key_id.clone(), material));
                    }
                }
                prov.channels.push((*binding).clone());
            }
            keys.initialize(prov)
                .map_err(|e| invalid(format!("node `{}`: {e}", spec.id)))?;

            let needed = spec
                .subscribe
                .iter()
                .chain(spec.routes.iter().flat_map(|r| [&r.from, &r.to]));
            for can_id in needed {
                if !keys.has_channel(*can_id) {
                    return Err(invalid(format!(
                        "node `{}` uses {can_id} without keys for it",
                        spec.id
                    )));
                }
            }
        }

        if !spec.routes.is_empty() && spec.role != Role::Gateway {
            return Err(invalid(format!(
                "node `{}` has routes but is not a gateway",
                spec.id
            )));
        }
        let mut node =
            EcuNode::new(spec.id.clone(), spec.role, protection, keys).fast_path(spec.fast_path);
        for id in &spec.subscribe {
            node = node.subscribe(*id);
        }
        for r in &spec.routes {
            node = node.route(r.from, r.to);
        }
        if let Some(w) = spec.retry_window {
            node = node
                .retry_window(w)
                .map_err(|e| invalid(format!("node `{}`: {e}", spec.id)))?;
        }
        nodes.push(node);
    }
    Ok(nodes)
}

fn schedule(s: &Scenario, nodes: &[EcuNode]) -> Result<Vec<(u64, Action)>, SimError> {
    let index: HashMap<&str, usize> = nodes.iter().enumerate().map(|(i, n)| (n.id(), i)).collect();
    let mut actions = Vec::new();

    for t in &s.traffic {
        let &node = index
            .get(t.node.as_str())
            .ok_or_else(|| invalid(format!("traffic from unknown node `{}`", t.node)))?;
        let n = &nodes[node];
        if matches!(n.protection(), Protection::Secured(_)) && !n.keys().has_channel(t.can_id) {
            return Err(invalid(format!(
                "node `{}` sends on {} without keys",
                t.node, t.can_id
            )));
        }
        if t.period == 0 && t.count > 1 {
            return Err(invalid("traffic period must be positive"));
        }
        let payload = match &t.payload {
            PayloadSpec::Random => None,
            PayloadSpec::Hex(h) => {
                let bytes = hex::decode(h).map_err(|e| invalid(format!("payload `{h}`: {e}")))?;
                let bits = n.payload_bits().unwrap_or(bytes.len() as u32 * 8);
                Some(
                    BitString::from_bytes(&bytes, bits)
                        .map_err(|e| invalid(format!("payload `{h}`: {e}")))?,
                )
            }
        };
        for i in 0..t.count {
            actions.push((
                t.start + i * t.period,
                Action::Transmit {
                    node,
                    can_id: t.can_id,
                    payload,
                },
            ));
        }
    }

    for d in &s.drops {
        if !index.contains_key(d.node.as_str()) {
            return Err(invalid(format!("drop rule for unknown node `{}`", d.node)));
        }
    }

    for a in &s.attacks {
        let action = match a {
            AttackStep::Replay { can_id, index, .. } => Action::Replay {
                can_id: *can_id,
                index: *index,
            },
            AttackStep::Inject { can_id, data, .. } => {
                let bytes = hex::decode(data).map_err(|e| invalid(format!("inject data: {e}")))?;
                let frame = CanFrame::new(*can_id, &bytes).map_err(|e| invalid(e.to_string()))?;
                Action::Inject { frame }
            }
            AttackStep::Tamper { can_id, bit, .. } => {
                if *bit >= 64 {
                    return Err(invalid("tamper bit must be below 64"));
                }
                Action::Tamper {
                    can_id: *can_id,
                    bit: *bit,
                }
            }
            AttackStep::Fuzz { count, can_ids, .. } => Action::Fuzz {
                count: *count,
                can_ids: can_ids.clone(),
            },
        };
        actions.push((a.tick(), action));
    }

    // Stable: same-tick actions keep file order, traffic before attacks.
    actions.sort_by_key(|(tick, _)| *tick);
    Ok(actions)
}

fn random_payload(rng: &mut ChaCha8Rng, bits: u32) -> BitString {
    BitString::low_bits(rng.random::<u64>(), bits).expect("bits <= 64")
}

/// Runs a scenario to completion. Identical scenarios give identical traces.
pub fn run_scenario(s: &Scenario) -> Result<TraceLog, SimError> {
    let nodes = build_nodes(s)?;
    let actions = schedule(s, &nodes)?;

    let drop_rules: Vec<(usize, u64, Option<CanId>)> = s
        .drops
        .iter()
        .map(|d| {
            let idx = nodes
                .iter()
                .position(|n| n.id() == d.node)
                .expect("validated");
            (idx, d.tick, d.can_id)
        })
        .collect();
    let lose = move |idx: usize, e: &BusEvent| {
        drop_rules
            .iter()
            .any(|&(n, t, id)| n == idx && t == e.tick && id.is_none_or(|id| id == e.frame.id()))
    };

    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let mut bus = Bus::new(nodes).with_interface(s.interface.clone());
    let mut sniffed: BTreeMap<CanId, Vec<CanFrame>> = BTreeMap::new();
    let mut armed: BTreeMap<CanId, usize> = BTreeMap::new();

    for (tick, action) in actions {
        match action {
            Action::Transmit {
                node,
                can_id,
                payload,
            } => {
                let bits = bus.nodes[node].payload_bits().unwrap_or(64);
                let payload = payload.unwrap_or_else(|| random_payload(&mut rng, bits));
                let frame = bus.nodes[node].secure(can_id, &payload).map_err(|source| {
                    SimError::Transmit {
                        node: bus.nodes[node].id().to_string(),
                        can_id,
                        source,
                    }
                })?;
                let (origin, wire) = match armed.remove(&can_id) {
                    Some(bit) if bit < usize::from(frame.dlc()) * 8 => {
                        (ATTACKER.to_string(), frame.flip_bit(bit))
                    }
                    _ => (bus.nodes[node].id().to_string(), frame),
                };
                sniffed.entry(can_id).or_default().push(frame);
                bus.deliver(tick, &origin, wire, &lose);
            }
            Action::Replay { can_id, index } => {
                let history = sniffed.get(&can_id).map(Vec::as_slice).unwrap_or(&[]);
                let pick = match index {
                    Some(i) => history.get(i),
                    None => history.last(),
                };
                if let Some(frame) = pick.copied() {
                    bus.deliver(tick, ATTACKER, frame, &lose);
                }
            }
            Action::Inject { frame } => {
                bus.deliver(tick, ATTACKER, frame, &lose);
            }
            Action::Tamper { can_id, bit } => {
                armed.insert(can_id, bit);
            }
            Action::Fuzz { count, can_ids } => {
                for _ in 0..count {
                    let id = if can_ids.is_empty() {
                        CanId::new(rng.random_range(0..=0x7FF)).expect("in range")
                    } else {
                        can_ids[rng.random_range(0..can_ids.len())]
                    };
                    let dlc = rng.random_range(0..=8usize);
                    let mut data = [0u8; 8];
                    rng.fill(&mut data[..dlc]);
                    let frame = CanFrame::new(id, &data[..dlc]).expect("dlc <= 8");
                    bus.deliver(tick, ATTACKER, frame, &lose);
                }
            }
        }
    }
    Ok(bus.into_trace())
}
