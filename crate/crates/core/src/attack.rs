//! Attack campaigns against a simulated three-node network, and the
//! threat × mode mitigation matrix built from their results.
//!
//! Network: `ecu-100` sends on 0x100, `ecu-200` sends on 0x200 (it is also
//! the masquerading insider), and `victim` receives both. Each campaign
//! also runs a positive control that is expected to succeed, so a
//! "mitigated" verdict cannot come from a harness that never lets anything
//! through.
//!
//! Success criteria:
//! * replay: any re-injected, previously accepted frame is accepted again.
//! * tampering: any frame with one flipped data bit is accepted.
//! * forging: more than `forge_allowance` random keyless data fields are
//!   accepted, or any valid frame copied from another identifier is.
//! * fuzzing: the victim application receives more than `forge_allowance`
//!   distinct payloads from fuzzed frames.
//! * masquerading: a frame secured by an insider under its own keys but
//!   sent on the victim identifier is accepted.
//! * information gathering: the dictionary recovery rate exceeds chance
//!   (`1 / dictionary_size`) by more than three binomial standard errors.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitString;
use crate::can::{CanFrame, CanId};
use crate::keystore::{ChannelKeys, KeyId, KeyMaterial, KeyStore, Provisioning};
use crate::profile::ValidatedProfile;
use crate::sim::{Bus, EcuNode, Protection, Role, Verdict, ATTACKER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Threat {
    Replay,
    Tampering,
    Forging,
    Fuzzing,
    Masquerading,
    InformationGathering,
}

impl Threat {
    pub const ALL: [Threat; 6] = [
        Threat::Replay,
        Threat::Tampering,
        Threat::Forging,
        Threat::Fuzzing,
        Threat::Masquerading,
        Threat::InformationGathering,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Threat::Replay => "replay",
            Threat::Tampering => "tampering",
            Threat::Forging => "forging",
            Threat::Fuzzing => "fuzzing",
            Threat::Masquerading => "masquerading",
            Threat::InformationGathering => "information-gathering",
        }
    }
}

impl fmt::Display for Threat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Authentication only, or authentication followed by encryption.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Secoc,
    MacThenEncrypt,
}

impl Mode {
    pub const ALL: [Mode; 2] = [Mode::Secoc, Mode::MacThenEncrypt];

    pub fn of(profile: &ValidatedProfile) -> Mode {
        if profile.encrypts() {
            Mode::MacThenEncrypt
        } else {
            Mode::Secoc
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Secoc => "secoc",
            Mode::MacThenEncrypt => "mac-then-encrypt",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackParams {
    pub seed: u64,
    /// Genuine frames per campaign (replay, tampering, masquerading,
    /// information gathering).
    pub frames: u64,
    /// Attempts for forging and fuzzing.
    pub forgeries: u64,
    /// Accepted forgeries tolerated before forging or fuzzing counts as a
    /// success. Two is the binomial bound for 10⁶ trials against a 24-bit
    /// tag (expected 0.06).
    pub forge_allowance: u64,
    pub dictionary_size: usize,
}

impl Default for AttackParams {
    fn default() -> Self {
        AttackParams {
            seed: 0x5EED,
            frames: 1_000,
            forgeries: 1_000_000,
            forge_allowance: 2,
            dictionary_size: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackResult {
    pub threat: Threat,
    pub mode: Mode,
    pub profile: String,
    pub succeeded: bool,
    pub control_succeeded: bool,
    pub evidence: BTreeMap<String, u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl AttackResult {
    fn new(threat: Threat, profile: &ValidatedProfile) -> Self {
        AttackResult {
            threat,
            mode: Mode::of(profile),
            profile: profile.name().to_string(),
            succeeded: false,
            control_succeeded: false,
            evidence: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }

    fn record(&mut self, key: &str, value: u64) {
        self.evidence.insert(key.to_string(), value);
    }

    pub fn count(&self, key: &str) -> u64 {
        self.evidence.get(key).copied().unwrap_or(0)
    }
}

const VICTIM_ID: u16 = 0x100;
const INSIDER_ID: u16 = 0x200;
const SENDER: usize = 0;
const INSIDER: usize = 1;
const VICTIM: usize = 2;
const ROGUE: usize = 3;

fn can_id(raw: u16) -> CanId {
    CanId::new(u32::from(raw)).expect("constant identifier")
}

/// Keys for both channels, derived from the campaign seed.
fn network_keys(seed: u64) -> Vec<(u16, KeyMaterial, KeyMaterial)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    [VICTIM_ID, INSIDER_ID]
        .into_iter()
        .map(|id| {
            let mut mac = [0u8; 16];
            let mut enc = [0u8; 16];
            rng.fill(&mut mac);
            rng.fill(&mut enc);
            (id, KeyMaterial::new(mac), KeyMaterial::new(enc))
        })
        .collect()
}

fn store(keys: &[(u16, KeyMaterial, KeyMaterial)], ids: &[u16]) -> KeyStore {
    let mut p = Provisioning::default();
    for (id, mac, enc) in keys.iter().filter(|k| ids.contains(&k.0)) {
        let (m, e) = (
            KeyId::new(format!("mac-{id:03x}")),
            KeyId::new(format!("enc-{id:03x}")),
        );
        p.keys.push((m.clone(), mac.clone()));
        p.keys.push((e.clone(), enc.clone()));
        p.channels.push(ChannelKeys {
            can_id: can_id(*id),
            mac_key: m,
            enc_key: e,
        });
    }
    let mut s = KeyStore::new();
    s.initialize(p)
        .expect("generated provisioning is consistent");
    s
}

/// Builds the campaign network. With `profile = None` every node is plain
/// CAN. The rogue node holds the victim channel's keys and is only used
/// by controls.
fn network(profile: Option<&ValidatedProfile>, seed: u64) -> Bus {
    let keys = network_keys(seed);
    let node = |id: &str, role, ids: &[u16]| match profile {
        Some(p) => EcuNode::new(id, role, Protection::Secured(p.clone()), store(&keys, ids)),
        None => EcuNode::new(id, role, Protection::Plain, KeyStore::new()),
    };
    Bus::new(vec![
        node("ecu-100", Role::Sender, &[VICTIM_ID]),
        node("ecu-200", Role::Sender, &[INSIDER_ID]),
        node("victim", Role::Receiver, &[VICTIM_ID, INSIDER_ID])
            .subscribe(can_id(VICTIM_ID))
            .subscribe(can_id(INSIDER_ID)),
        node("rogue", Role::Sender, &[VICTIM_ID]),
    ])
    .without_trace()
}

fn campaign_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    rng
}

fn random_payload(rng: &mut ChaCha8Rng, bits: u32) -> BitString {
    BitString::low_bits(rng.random::<u64>(), bits).expect("bits <= 64")
}

fn victim_verdict(verdicts: &[(usize, Verdict)]) -> Option<Verdict> {
    verdicts.iter().find(|(i, _)| *i == VICTIM).map(|(_, v)| *v)
}

fn accepted_by_victim(verdicts: &[(usize, Verdict)]) -> bool {
    victim_verdict(verdicts).is_some_and(|v| v.is_accepted())
}

/// Secures at `node` and puts the frame on the bus as that node.
fn send(
    bus: &mut Bus,
    tick: &mut u64,
    node: usize,
    id: u16,
    payload: &BitString,
) -> (CanFrame, bool) {
    let frame = bus
        .node_mut(node)
        .secure(can_id(id), payload)
        .expect("campaign sender is provisioned");
    let origin = bus.nodes()[node].id().to_string();
    let ok = accepted_by_victim(&bus.inject(*tick, &origin, frame));
    *tick += 1;
    (frame, ok)
}

fn inject(bus: &mut Bus, tick: &mut u64, frame: CanFrame) -> bool {
    let ok = accepted_by_victim(&bus.inject(*tick, ATTACKER, frame));
    *tick += 1;
    ok
}

/// Each genuine frame is replayed right after it is sent, and the whole
/// capture is replayed again once traffic stops.
pub fn attack_replay(profile: &ValidatedProfile, params: &AttackParams) -> AttackResult {
    let run = |arm: Option<&ValidatedProfile>| {
        let mut bus = network(arm, params.seed);
        let mut rng = campaign_rng(params.seed);
        let mut tick = 0;
        let mut captured = Vec::new();
        let (mut attempts, mut accepted) = (0u64, 0u64);
        for _ in 0..params.frames {
            let p = random_payload(&mut rng, profile.layout().payload_bits);
            let (frame, genuine_ok) = send(&mut bus, &mut tick, SENDER, VICTIM_ID, &p);
            if genuine_ok {
                captured.push(frame);
                attempts += 1;
                accepted += u64::from(inject(&mut bus, &mut tick, frame));
            }
        }
        for frame in captured {
            attempts += 1;
            accepted += u64::from(inject(&mut bus, &mut tick, frame));
        }
        (attempts, accepted)
    };

    let mut r = AttackResult::new(Threat::Replay, profile);
    let (attempts, accepted) = run(Some(profile));
    r.record("replays", attempts);
    r.record("replays_accepted", accepted);
    r.succeeded = accepted > 0;
    let (_, control) = run(None);
    r.record("control_replays_accepted", control);
    r.control_succeeded = control > 0;
    if profile.freshness_bits().is_none() {
        r.warnings.push(format!(
            "profile `{}` carries no freshness value, so replayed frames cannot be detected",
            profile.name()
        ));
    }
    r
}

/// For each genuine frame the attacker delivers a copy with one random
/// data bit flipped ahead of it.
pub fn attack_tamper(profile: &ValidatedProfile, params: &AttackParams) -> AttackResult {
    let run = |arm: Option<&ValidatedProfile>| {
        let mut bus = network(arm, params.seed);
        let mut rng = campaign_rng(params.seed);
        let mut tick = 0;
        let (mut tampered_ok, mut genuine_ok) = (0u64, 0u64);
        for _ in 0..params.frames {
            let p = random_payload(&mut rng, profile.layout().payload_bits);
            let frame = bus
                .node_mut(SENDER)
                .secure(can_id(VICTIM_ID), &p)
                .expect("campaign sender is provisioned");
            let bit = rng.random_range(0..usize::from(frame.dlc()) * 8);
            tampered_ok += u64::from(inject(&mut bus, &mut tick, frame.flip_bit(bit)));
            genuine_ok += u64::from(accepted_by_victim(&bus.inject(tick, "ecu-100", frame)));
            tick += 1;
        }
        (tampered_ok, genuine_ok)
    };

    let mut r = AttackResult::new(Threat::Tampering, profile);
    let (tampered, genuine) = run(Some(profile));
    r.record("tampered", params.frames);
    r.record("tampered_accepted", tampered);
    r.record("genuine_accepted", genuine);
    r.succeeded = tampered > 0;
    let (control, _) = run(None);
    r.record("control_tampered_accepted", control);
    r.control_succeeded = control > 0;
    r
}

/// Random data fields on the victim identifier from an attacker with no
/// keys, then valid 0x200 frames rewritten to 0x100. The control secures
/// fresh frames with the victim channel's keys.
pub fn attack_forge(profile: &ValidatedProfile, params: &AttackParams) -> AttackResult {
    let mut r = AttackResult::new(Threat::Forging, profile);
    let mut bus = network(Some(profile), params.seed);
    let mut rng = campaign_rng(params.seed);
    let mut tick = 0;

    let mut accepted = 0u64;
    for _ in 0..params.forgeries {
        let frame = CanFrame::from_data_field(can_id(VICTIM_ID), rng.random());
        accepted += u64::from(inject(&mut bus, &mut tick, frame));
    }
    r.record("forged", params.forgeries);
    r.record("forged_accepted", accepted);

    let mut cross = 0u64;
    for _ in 0..params.frames {
        let p = random_payload(&mut rng, profile.layout().payload_bits);
        let (frame, _) = send(&mut bus, &mut tick, INSIDER, INSIDER_ID, &p);
        cross += u64::from(inject(
            &mut bus,
            &mut tick,
            frame.with_id(can_id(VICTIM_ID)),
        ));
    }
    r.record("cross_id_copies", params.frames);
    r.record("cross_id_accepted", cross);
    r.succeeded = accepted > params.forge_allowance || cross > 0;

    let mut control = 0u64;
    for _ in 0..params.frames.max(1) {
        let p = random_payload(&mut rng, profile.layout().payload_bits);
        control += u64::from(send(&mut bus, &mut tick, ROGUE, VICTIM_ID, &p).1);
    }
    r.record("control_accepted", control);
    r.control_succeeded = control > 0;
    r
}

/// Random identifiers (half aimed at the victim identifier), lengths and
/// contents. The control repeats the campaign against plain CAN.
pub fn attack_fuzz(profile: &ValidatedProfile, params: &AttackParams) -> AttackResult {
    let run = |arm: Option<&ValidatedProfile>| {
        let mut bus = network(arm, params.seed);
        let mut rng = campaign_rng(params.seed);
        let mut tick = 0;
        let mut accepted = 0u64;
        let mut payloads = HashSet::new();
        for _ in 0..params.forgeries {
            let id = if rng.random::<bool>() {
                can_id(VICTIM_ID)
            } else {
                CanId::new(rng.random_range(0..=0x7FF)).expect("in range")
            };
            let dlc = rng.random_range(0..=8usize);
            let mut data = [0u8; 8];
            rng.fill(&mut data[..dlc]);
            let frame = CanFrame::new(id, &data[..dlc]).expect("dlc <= 8");
            let before = bus.nodes()[VICTIM].delivered().len();
            if inject(&mut bus, &mut tick, frame) {
                accepted += 1;
                if let Some(d) = bus.nodes()[VICTIM].delivered().get(before) {
                    payloads.insert(*d);
                }
            }
        }
        (accepted, payloads.len() as u64)
    };

    let mut r = AttackResult::new(Threat::Fuzzing, profile);
    let (accepted, distinct) = run(Some(profile));
    r.record("fuzzed", params.forgeries);
    r.record("fuzzed_accepted", accepted);
    r.record("distinct_payloads", distinct);
    r.succeeded = distinct > params.forge_allowance;
    let (_, control) = run(None);
    r.record("control_distinct_payloads", control);
    r.control_succeeded = control > params.forge_allowance;
    r
}

/// `ecu-200` secures frames under its own keys and sends them on 0x100.
/// The control is the rogue node, which holds the 0x100 keys.
pub fn attack_masquerade(profile: &ValidatedProfile, params: &AttackParams) -> AttackResult {
    let mut r = AttackResult::new(Threat::Masquerading, profile);
    let mut bus = network(Some(profile), params.seed);
    let mut rng = campaign_rng(params.seed);
    let mut tick = 0;

    let mut accepted = 0u64;
    for _ in 0..params.frames {
        let p = random_payload(&mut rng, profile.layout().payload_bits);
        let frame = bus
            .node_mut(INSIDER)
            .secure(can_id(INSIDER_ID), &p)
            .expect("insider is provisioned");
        accepted += u64::from(inject(
            &mut bus,
            &mut tick,
            frame.with_id(can_id(VICTIM_ID)),
        ));
    }
    r.record("masqueraded", params.frames);
    r.record("masqueraded_accepted", accepted);
    r.succeeded = accepted > 0;

    let mut control = 0u64;
    for _ in 0..params.frames.max(1) {
        let p = random_payload(&mut rng, profile.layout().payload_bits);
        control += u64::from(send(&mut bus, &mut tick, ROGUE, VICTIM_ID, &p).1);
    }
    r.record("control_accepted", control);
    r.control_succeeded = control > 0;
    r
}

/// Chance level plus three binomial standard errors, in parts per million.
pub fn recovery_threshold_ppm(dictionary_size: usize, frames: u64) -> u64 {
    let p = 1.0 / dictionary_size as f64;
    let margin = 3.0 * (p * (1.0 - p) / frames.max(1) as f64).sqrt();
    ((p + margin) * 1e6).floor() as u64
}

/// The attacker knows the frame layout and the candidate payload
/// dictionary (payload pattern → function), and labels each of `frames`
/// sniffed frames: by looking up the payload bit positions of the data
/// field in the dictionary, else by a uniform guess. Distinct data fields
/// are counted as clustering evidence.
pub fn attack_info_gathering(profile: &ValidatedProfile, params: &AttackParams) -> AttackResult {
    let n = params.dictionary_size.max(1);
    let layout = profile.layout();

    let run = |arm: Option<&ValidatedProfile>| {
        let mut bus = network(arm, params.seed);
        let mut rng = campaign_rng(params.seed);
        let dictionary: Vec<BitString> = (0..n)
            .map(|_| random_payload(&mut rng, layout.payload_bits))
            .collect();
        let lookup: HashMap<u64, usize> = dictionary
            .iter()
            .enumerate()
            .map(|(i, p)| (p.value(), i))
            .collect();

        let (mut recovered, mut distinct) = (0u64, HashSet::new());
        for tick in 0..params.frames {
            let label = rng.random_range(0..n);
            let frame = bus
                .node_mut(SENDER)
                .secure(can_id(VICTIM_ID), &dictionary[label])
                .expect("campaign sender is provisioned");
            bus.inject(tick, "ecu-100", frame);

            let mut field = [0u8; 8];
            field[..frame.data().len()].copy_from_slice(frame.data());
            distinct.insert(field);
            let bits = u64::from_be_bytes(field) >> (64 - layout.payload_bits);
            let guess = lookup
                .get(&bits)
                .copied()
                .unwrap_or_else(|| rng.random_range(0..n));
            recovered += u64::from(guess == label);
        }
        (recovered, distinct.len() as u64)
    };

    let mut r = AttackResult::new(Threat::InformationGathering, profile);
    let threshold = recovery_threshold_ppm(n, params.frames);
    let rate_ppm = |recovered: u64| recovered * 1_000_000 / params.frames.max(1);
    let (recovered, distinct) = run(Some(profile));
    r.record("sniffed", params.frames);
    r.record("recovered", recovered);
    r.record("recovery_ppm", rate_ppm(recovered));
    r.record("threshold_ppm", threshold);
    r.record("distinct_data_fields", distinct);
    r.succeeded = params.frames > 0 && rate_ppm(recovered) > threshold;
    let (control, _) = run(None);
    r.record("control_recovered", control);
    r.control_succeeded = params.frames > 0 && rate_ppm(control) > threshold;
    if profile.encrypts() && distinct < params.frames {
        r.warnings.push(format!(
            "{distinct} distinct data fields in {} frames: repeated payloads encrypt identically, \
             so sniffed traffic can be clustered",
            params.frames
        ));
    }
    r
}

pub fn run_attack(
    threat: Threat,
    profile: &ValidatedProfile,
    params: &AttackParams,
) -> AttackResult {
    match threat {
        Threat::Replay => attack_replay(profile, params),
        Threat::Tampering => attack_tamper(profile, params),
        Threat::Forging => attack_forge(profile, params),
        Threat::Fuzzing => attack_fuzz(profile, params),
        Threat::Masquerading => attack_masquerade(profile, params),
        Threat::InformationGathering => attack_info_gathering(profile, params),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HarnessError {
    #[error("no result for {threat} in {mode} mode")]
    MissingCell { threat: Threat, mode: Mode },
    #[error("{0} and {1} are the same mode; one profile per mode is needed")]
    SameMode(String, String),
}

/// `mitigated` per mode and threat.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MitigationMatrix {
    pub cells: BTreeMap<Mode, BTreeMap<Threat, bool>>,
}

impl MitigationMatrix {
    pub fn mitigated(&self, threat: Threat, mode: Mode) -> Option<bool> {
        self.cells.get(&mode)?.get(&threat).copied()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("matrix serializes")
    }

    pub fn render(&self) -> String {
        let width = Threat::ALL
            .iter()
            .map(|t| t.name().len())
            .max()
            .unwrap_or(0);
        let mut out = format!("{:width$}", "threat");
        for m in Mode::ALL {
            out.push_str(&format!("  {:>16}", m.name()));
        }
        out.push('\n');
        for t in Threat::ALL {
            out.push_str(&format!("{:width$}", t.name()));
            for m in Mode::ALL {
                let cell = match self.mitigated(t, m) {
                    Some(true) => "mitigated",
                    Some(false) => "NOT mitigated",
                    None => "-",
                };
                out.push_str(&format!("  {cell:>16}"));
            }
            out.push('\n');
        }
        out
    }
}

/// One result per (threat, mode) is required; duplicates keep the last.
pub fn build_matrix(results: &[AttackResult]) -> Result<MitigationMatrix, HarnessError> {
    let mut cells: BTreeMap<Mode, BTreeMap<Threat, bool>> = BTreeMap::new();
    for r in results {
        cells
            .entry(r.mode)
            .or_default()
            .insert(r.threat, !r.succeeded);
    }
    for mode in Mode::ALL {
        for threat in Threat::ALL {
            if !cells.get(&mode).is_some_and(|c| c.contains_key(&threat)) {
                return Err(HarnessError::MissingCell { threat, mode });
            }
        }
    }
    Ok(MitigationMatrix { cells })
}

/// Runs all six campaigns against an authentication-only profile and an
/// encrypting one.
pub fn run_matrix(
    secoc: &ValidatedProfile,
    encrypted: &ValidatedProfile,
    params: &AttackParams,
) -> Result<(Vec<AttackResult>, MitigationMatrix), HarnessError> {
    if Mode::of(secoc) == Mode::of(encrypted) || Mode::of(secoc) != Mode::Secoc {
        return Err(HarnessError::SameMode(
            secoc.name().into(),
            encrypted.name().into(),
        ));
    }
    let results: Vec<AttackResult> = [secoc, encrypted]
        .into_iter()
        .flat_map(|p| Threat::ALL.map(|t| run_attack(t, p, params)))
        .collect();
    let matrix = build_matrix(&results)?;
    Ok((results, matrix))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{builtin_profile_1, builtin_profile_1_fv, builtin_profile_secoc_fv};

    fn small() -> AttackParams {
        AttackParams {
            frames: 200,
            forgeries: 2_000,
            ..AttackParams::default()
        }
    }

    fn v(p: crate::profile::SecurityProfile) -> ValidatedProfile {
        ValidatedProfile::new(p).unwrap()
    }

    #[test]
    fn zero_replays_is_not_success() {
        let p = AttackParams {
            frames: 0,
            ..small()
        };
        let r = attack_replay(&v(builtin_profile_1_fv()), &p);
        assert_eq!(r.count("replays"), 0);
        assert!(!r.succeeded);
    }

    #[test]
    fn replay_without_freshness_succeeds_with_warning() {
        let r = attack_replay(&v(builtin_profile_1()), &small());
        assert!(r.succeeded);
        assert_eq!(r.warnings.len(), 1);
        let r = attack_replay(&v(builtin_profile_1_fv()), &small());
        assert!(!r.succeeded && r.control_succeeded);
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn threshold_for_sixteen_entries() {
        assert_eq!(recovery_threshold_ppm(16, 1000), 85_463);
    }

    #[test]
    fn info_gathering_clusters_without_freshness() {
        let r = attack_info_gathering(&v(builtin_profile_1()), &small());
        assert_eq!(r.count("distinct_data_fields"), 16);
        assert!(!r.succeeded);
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn missing_cell() {
        let p = small();
        let results: Vec<_> = Threat::ALL
            .into_iter()
            .map(|t| run_attack(t, &v(builtin_profile_secoc_fv()), &p))
            .collect();
        assert_eq!(
            build_matrix(&results),
            Err(HarnessError::MissingCell {
                threat: Threat::Replay,
                mode: Mode::MacThenEncrypt
            })
        );
    }

    #[test]
    fn same_mode_is_refused() {
        let p = v(builtin_profile_1_fv());
        assert!(matches!(
            run_matrix(&p, &p, &small()),
            Err(HarnessError::SameMode(..))
        ));
    }

    #[test]
    fn render_lists_every_threat() {
        let (_, m) = run_matrix(
            &v(builtin_profile_secoc_fv()),
            &v(builtin_profile_1_fv()),
            &small(),
        )
        .unwrap();
        let text = m.render();
        assert_eq!(text.lines().count(), 7);
        assert!(text.contains("information-gathering  "));
    }
}
