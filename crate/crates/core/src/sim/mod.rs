//! Deterministic, single-clock broadcast CAN bus.
//!
//! Every frame put on the bus is delivered to every node except its origin,
//! in node order. Nodes subscribed to the frame's identifier run the
//! receive path and record one [`Decision`]; gateways re-secure accepted
//! frames onto their outbound identifier, and the forwarded frame goes on
//! the bus within the same tick, right after the frame that caused it.
//! Ticks never go backwards: a frame offered with an earlier tick than the
//! last one is stamped with the last one. There is no arbitration or bit
//! timing.

pub mod scenario;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bits::BitString;
use crate::can::{CanFrame, CanId};
use crate::candump::{CandumpRecord, Timestamp};
use crate::codec::{
    extract_payload_unauthenticated, secure_frame, verify_frame, CodecError, PlainPayload,
    Rejection,
};
use crate::freshness::FreshnessState;
use crate::keystore::KeyStore;
use crate::profile::ValidatedProfile;

pub use scenario::{
    run_scenario, AttackStep, DropRule, NodeSpec, PayloadSpec, RouteSpec, Scenario, TrafficSpec,
};

/// Name used as the origin of injected frames.
pub const ATTACKER: &str = "attacker";

/// Microseconds per logical tick in candump timestamps.
pub const TICK_MICROS: u64 = 1_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    ScenarioInvalid(String),
    #[error("node `{node}` failed to transmit on {can_id}: {source}")]
    Transmit {
        node: String,
        can_id: CanId,
        source: CodecError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Sender,
    Receiver,
    Gateway,
}

/// How a node protects its traffic.
#[derive(Debug, Clone)]
pub enum Protection {
    Secured(ValidatedProfile),
    /// Plain CAN: payload bytes go on the wire as-is and every frame on a
    /// subscribed identifier is accepted. Used for harness control runs.
    Plain,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeStats {
    pub accepted: u64,
    pub rejected: BTreeMap<Rejection, u64>,
    pub forwarded: u64,
    pub lost: u64,
}

impl NodeStats {
    pub fn rejected_total(&self) -> u64 {
        self.rejected.values().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ForwardError {
    #[error("no route for {0}")]
    NoRoute(CanId),
    #[error("inbound frame rejected: {0}")]
    Inbound(CodecError),
    #[error("outbound securing failed: {0}")]
    Outbound(CodecError),
}

#[derive(Debug)]
pub struct EcuNode {
    id: String,
    role: Role,
    protection: Protection,
    keys: KeyStore,
    tx_freshness: BTreeMap<CanId, FreshnessState>,
    rx_freshness: BTreeMap<CanId, FreshnessState>,
    subscriptions: BTreeSet<CanId>,
    routes: BTreeMap<CanId, CanId>,
    fast_path: bool,
    stats: NodeStats,
    delivered: Vec<(CanId, PlainPayload)>,
}

impl EcuNode {
    /// A node with an initialized key store. Freshness states are created
    /// for every provisioned channel when the profile uses freshness.
    pub fn new(id: impl Into<String>, role: Role, protection: Protection, keys: KeyStore) -> Self {
        let mut tx_freshness = BTreeMap::new();
        if let Protection::Secured(p) = &protection {
            if let Some(bits) = p.freshness_bits() {
                for can_id in keys.channel_ids() {
                    let state = FreshnessState::new(can_id, bits, p.layout().fvt_bits)
                        .expect("validated profile has consistent freshness widths");
                    tx_freshness.insert(can_id, state);
                }
            }
        }
        EcuNode {
            id: id.into(),
            role,
            protection,
            keys,
            rx_freshness: tx_freshness.clone(),
            tx_freshness,
            subscriptions: BTreeSet::new(),
            routes: BTreeMap::new(),
            fast_path: false,
            stats: NodeStats::default(),
            delivered: Vec::new(),
        }
    }

    pub fn subscribe(mut self, can_id: CanId) -> Self {
        self.subscriptions.insert(can_id);
        self
    }

    /// Gateway route; also subscribes to `from`.
    pub fn route(mut self, from: CanId, to: CanId) -> Self {
        self.subscriptions.insert(from);
        self.routes.insert(from, to);
        self
    }

    /// Forward without authenticating (decrypt and slice only).
    pub fn fast_path(mut self, enabled: bool) -> Self {
        self.fast_path = enabled;
        self
    }

    /// Overrides the retry window of every receive-side freshness state.
    pub fn retry_window(mut self, window: u64) -> Result<Self, crate::freshness::FreshnessError> {
        for state in self.rx_freshness.values_mut() {
            *state = state.clone().with_retry_window(window)?;
        }
        Ok(self)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn protection(&self) -> &Protection {
        &self.protection
    }

    pub fn keys(&self) -> &KeyStore {
        &self.keys
    }

    pub fn stats(&self) -> &NodeStats {
        &self.stats
    }

    pub fn is_subscribed(&self, can_id: CanId) -> bool {
        self.subscriptions.contains(&can_id)
    }

    /// Payloads handed to the application layer, in order.
    pub fn delivered(&self) -> &[(CanId, PlainPayload)] {
        &self.delivered
    }

    pub fn tx_freshness(&self, can_id: CanId) -> Option<&FreshnessState> {
        self.tx_freshness.get(&can_id)
    }

    pub fn rx_freshness(&self, can_id: CanId) -> Option<&FreshnessState> {
        self.rx_freshness.get(&can_id)
    }

    /// Payload width this node sends, or `None` for plain nodes.
    pub fn payload_bits(&self) -> Option<u32> {
        match &self.protection {
            Protection::Secured(p) => Some(p.layout().payload_bits),
            Protection::Plain => None,
        }
    }

    pub fn secure(
        &mut self,
        can_id: CanId,
        payload: &PlainPayload,
    ) -> Result<CanFrame, CodecError> {
        match &self.protection {
            Protection::Secured(profile) => secure_frame(
                can_id,
                payload,
                profile,
                &self.keys,
                self.tx_freshness.get_mut(&can_id),
            ),
            Protection::Plain => {
                let bytes = payload.to_bytes();
                CanFrame::new(can_id, &bytes).map_err(|_| CodecError::LayoutMismatch {
                    field: "payload",
                    expected: 64,
                    got: payload.len(),
                })
            }
        }
    }

    fn open(&mut self, frame: &CanFrame) -> Result<PlainPayload, CodecError> {
        match &self.protection {
            Protection::Secured(profile) => {
                if self.fast_path && self.role == Role::Gateway {
                    extract_payload_unauthenticated(frame, profile, &self.keys)
                } else {
                    verify_frame(
                        frame,
                        profile,
                        &self.keys,
                        self.rx_freshness.get_mut(&frame.id()),
                    )
                }
            }
            Protection::Plain => Ok(BitString::from_bytes(
                frame.data(),
                u32::from(frame.dlc()) * 8,
            )
            .expect("whole bytes")),
        }
    }

    /// Verifies (or, in fast-path mode, merely decrypts) an inbound frame
    /// and re-secures its payload for the outbound identifier.
    pub fn gateway_forward(&mut self, frame: &CanFrame) -> Result<CanFrame, ForwardError> {
        let to = *self
            .routes
            .get(&frame.id())
            .ok_or(ForwardError::NoRoute(frame.id()))?;
        let payload = self.open(frame).map_err(ForwardError::Inbound)?;
        self.secure(to, &payload).map_err(ForwardError::Outbound)
    }

    /// Receive path for one bus frame.
    fn receive(&mut self, frame: &CanFrame) -> Option<(Verdict, Option<CanFrame>)> {
        if !self.subscriptions.contains(&frame.id()) {
            return None;
        }
        if self.role == Role::Gateway && self.routes.contains_key(&frame.id()) {
            return Some(match self.gateway_forward(frame) {
                Ok(out) => {
                    self.stats.accepted += 1;
                    self.stats.forwarded += 1;
                    (Verdict::Forwarded { to: out.id() }, Some(out))
                }
                Err(ForwardError::Inbound(e)) | Err(ForwardError::Outbound(e)) => {
                    *self.stats.rejected.entry(e.rejection()).or_default() += 1;
                    (
                        Verdict::Rejected {
                            reason: e.rejection(),
                        },
                        None,
                    )
                }
                Err(ForwardError::NoRoute(_)) => unreachable!("route checked above"),
            });
        }
        Some(match self.open(frame) {
            Ok(payload) => {
                self.stats.accepted += 1;
                self.delivered.push((frame.id(), payload));
                (Verdict::Accepted { payload }, None)
            }
            Err(e) => {
                *self.stats.rejected.entry(e.rejection()).or_default() += 1;
                (
                    Verdict::Rejected {
                        reason: e.rejection(),
                    },
                    None,
                )
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Accepted { payload: PlainPayload },
    Forwarded { to: CanId },
    Rejected { reason: Rejection },
    Lost,
}

impl Verdict {
    pub fn is_accepted(&self) -> bool {
        matches!(self, Verdict::Accepted { .. } | Verdict::Forwarded { .. })
    }
}

/// One frame on the bus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BusEvent {
    pub tick: u64,
    pub seq: u64,
    pub origin: String,
    pub frame: CanFrame,
}

/// One receive-path outcome at one node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub tick: u64,
    pub seq: u64,
    pub node: String,
    pub origin: String,
    pub can_id: String,
    pub verdict: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<Rejection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub payload: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub forwarded_as: Option<String>,
}

/// Recorded bus events and decisions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TraceLog {
    pub interface: String,
    pub events: Vec<BusEvent>,
    pub decisions: Vec<Decision>,
    pub node_stats: BTreeMap<String, NodeStats>,
}

impl TraceLog {
    pub fn candump_lines(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            let rec = CandumpRecord {
                timestamp: Timestamp::from_micros(e.tick * TICK_MICROS),
                interface: self.interface.clone(),
                frame: e.frame,
            };
            let _ = writeln!(out, "{rec}");
        }
        out
    }

    /// One JSON object per line.
    pub fn decisions_jsonl(&self) -> String {
        let mut out = String::new();
        for d in &self.decisions {
            out.push_str(&serde_json::to_string(d).expect("decisions serialize"));
            out.push('\n');
        }
        out
    }

    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.candump_lines());
        h.update(self.decisions_jsonl());
        h.update(serde_json::to_string(&self.node_stats).expect("stats serialize"));
        hex::encode(h.finalize())
    }
}

/// The bus plus its nodes.
#[derive(Debug)]
pub struct Bus {
    nodes: Vec<EcuNode>,
    record: bool,
    next_seq: u64,
    last_tick: u64,
    trace: TraceLog,
}

impl Bus {
    pub fn new(nodes: Vec<EcuNode>) -> Self {
        Bus {
            nodes,
            record: true,
            next_seq: 0,
            last_tick: 0,
            trace: TraceLog {
                interface: "vcan0".into(),
                ..TraceLog::default()
            },
        }
    }

    /// Disables event/decision recording (counters are still kept).
    pub fn without_trace(mut self) -> Self {
        self.record = false;
        self
    }

    pub fn with_interface(mut self, name: impl Into<String>) -> Self {
        self.trace.interface = name.into();
        self
    }

    pub fn nodes(&self) -> &[EcuNode] {
        &self.nodes
    }

    pub fn node(&self, id: &str) -> Option<&EcuNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn node_mut(&mut self, idx: usize) -> &mut EcuNode {
        &mut self.nodes[idx]
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    /// Secures `payload` at node `sender` and delivers it. Returns the wire
    /// frame.
    pub fn send(
        &mut self,
        tick: u64,
        sender: usize,
        can_id: CanId,
        payload: &PlainPayload,
    ) -> Result<CanFrame, SimError> {
        let frame = self.nodes[sender]
            .secure(can_id, payload)
            .map_err(|source| SimError::Transmit {
                node: self.nodes[sender].id.clone(),
                can_id,
                source,
            })?;
        self.deliver(tick, &self.nodes[sender].id.clone(), frame, &|_, _| false);
        Ok(frame)
    }

    /// Puts a raw frame on the bus. Returns the decisions it caused,
    /// including those on frames forwarded by gateways.
    pub fn inject(&mut self, tick: u64, origin: &str, frame: CanFrame) -> Vec<(usize, Verdict)> {
        self.deliver(tick, origin, frame, &|_, _| false)
    }

    /// Delivers `frame` and anything gateways forward in response.
    /// `lose(node, event)` marks deliveries lost for that node.
    pub(crate) fn deliver(
        &mut self,
        tick: u64,
        origin: &str,
        frame: CanFrame,
        lose: &dyn Fn(usize, &BusEvent) -> bool,
    ) -> Vec<(usize, Verdict)> {
        let tick = tick.max(self.last_tick);
        self.last_tick = tick;
        let mut verdicts = Vec::new();
        let mut queue = VecDeque::from([(tick, origin.to_string(), frame)]);
        while let Some((tick, origin, frame)) = queue.pop_front() {
            let event = BusEvent {
                tick,
                seq: self.next_seq,
                origin,
                frame,
            };
            self.next_seq += 1;
            for idx in 0..self.nodes.len() {
                let node = &mut self.nodes[idx];
                if node.id == event.origin || !node.is_subscribed(frame.id()) {
                    continue;
                }
                let (verdict, forward) = if lose(idx, &event) {
                    node.stats.lost += 1;
                    (Verdict::Lost, None)
                } else {
                    node.receive(&frame).expect("subscription checked")
                };
                if let Some(out) = forward {
                    queue.push_back((tick, node.id.clone(), out));
                }
                if self.record {
                    self.trace
                        .decisions
                        .push(decision(&event, &self.nodes[idx].id, &verdict));
                }
                verdicts.push((idx, verdict));
            }
            if self.record {
                self.trace.events.push(event);
            }
        }
        verdicts
    }

    /// Consumes the bus, returning the trace with final node counters.
    pub fn into_trace(mut self) -> TraceLog {
        self.trace.node_stats = self
            .nodes
            .iter()
            .map(|n| (n.id.clone(), n.stats.clone()))
            .collect();
        self.trace
    }
}

fn decision(event: &BusEvent, node: &str, verdict: &Verdict) -> Decision {
    let mut d = Decision {
        tick: event.tick,
        seq: event.seq,
        node: node.to_string(),
        origin: event.origin.clone(),
        can_id: event.frame.id().to_string(),
        verdict: String::new(),
        reason: None,
        payload: None,
        forwarded_as: None,
    };
    match verdict {
        Verdict::Accepted { payload } => {
            d.verdict = "accept".into();
            d.payload = Some(payload.to_string());
        }
        Verdict::Forwarded { to } => {
            d.verdict = "forward".into();
            d.forwarded_as = Some(to.to_string());
        }
        Verdict::Rejected { reason } => {
            d.verdict = "reject".into();
            d.reason = Some(*reason);
        }
        Verdict::Lost => d.verdict = "lost".into(),
    }
    d
}
