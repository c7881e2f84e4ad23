//! Bus simulation: honest runs, gateways, determinism and trace shape.

mod common;

use std::collections::BTreeMap;

use canseal::bits::BitString;
use canseal::codec::Rejection;
use canseal::sim::{run_scenario, Bus, EcuNode, Protection, Role, Scenario, SimError};
use common::*;
use proptest::prelude::*;

fn fixture(name: &str) -> Scenario {
    let path = format!(
        "{}/../../fixtures/scenarios/{name}",
        env!("CARGO_MANIFEST_DIR")
    );
    Scenario::from_toml(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn honest_run_accepts_everything() {
    let t = run_scenario(&fixture("honest.toml")).unwrap();
    let dash = &t.node_stats["dash"];
    assert_eq!(
        (dash.accepted, dash.rejected_total(), dash.lost),
        (100, 0, 0)
    );
    assert!(t.decisions.iter().all(|d| d.verdict == "accept"));
}

#[test]
fn gateway_scenario_counts() {
    let t = run_scenario(&fixture("gateway.toml")).unwrap();
    let gw = &t.node_stats["gateway"];
    let dash = &t.node_stats["dash"];
    // 200 sent: one lost at the gateway, one replaced by a tampered copy.
    assert_eq!(gw.lost, 1);
    assert_eq!(gw.forwarded, 198);
    // Every attacker frame on 0x100 (tampered copy, replay, injection,
    // fuzzing) is rejected at the gateway.
    let hostile = t
        .events
        .iter()
        .filter(|e| e.origin == "attacker" && e.frame.id().raw() == 0x100)
        .count() as u64;
    assert!(hostile > 3);
    assert_eq!(gw.rejected_total(), hostile);
    assert_eq!(dash.lost, 1);
    assert_eq!(dash.accepted, 197);
    assert_eq!(dash.rejected.get(&Rejection::WindowExceeded), None);
    assert!(t.candump_lines().lines().all(|l| l.contains(" vcan1 ")));
}

#[test]
fn runs_are_byte_identical() {
    for name in ["honest.toml", "gateway.toml"] {
        let a = run_scenario(&fixture(name)).unwrap();
        let b = run_scenario(&fixture(name)).unwrap();
        assert_eq!(a.candump_lines(), b.candump_lines());
        assert_eq!(a.decisions_jsonl(), b.decisions_jsonl());
        assert_eq!(a.hash(), b.hash());
    }
}

#[test]
fn seed_changes_the_trace() {
    let mut s = fixture("honest.toml");
    let a = run_scenario(&s).unwrap();
    s.seed += 1;
    assert_ne!(a.hash(), run_scenario(&s).unwrap().hash());
}

#[test]
fn every_event_reaches_every_subscriber_in_order() {
    let t = run_scenario(&fixture("gateway.toml")).unwrap();
    let subscribed: BTreeMap<&str, Vec<u16>> = BTreeMap::from([
        ("engine", vec![]),
        ("gateway", vec![0x100]),
        ("dash", vec![0x300]),
    ]);
    for (node, ids) in &subscribed {
        let expected: Vec<u64> = t
            .events
            .iter()
            .filter(|e| e.origin != *node && ids.contains(&e.frame.id().raw()))
            .map(|e| e.seq)
            .collect();
        let got: Vec<u64> = t
            .decisions
            .iter()
            .filter(|d| d.node == *node)
            .map(|d| d.seq)
            .collect();
        assert_eq!(got, expected, "{node}");
        let s = &t.node_stats[*node];
        assert_eq!(s.accepted + s.rejected_total() + s.lost, got.len() as u64);
    }
    assert!(t
        .events
        .windows(2)
        .all(|w| (w[0].tick, w[0].seq) < (w[1].tick, w[1].seq)));
}

#[test]
fn scenario_validation() {
    let mut s = fixture("honest.toml");
    s.nodes[1].channels.clear();
    assert!(matches!(
        run_scenario(&s),
        Err(SimError::ScenarioInvalid(_))
    ));

    let mut s = fixture("honest.toml");
    s.nodes[0].profile = "missing".into();
    assert!(matches!(
        run_scenario(&s),
        Err(SimError::ScenarioInvalid(_))
    ));

    let mut s = fixture("honest.toml");
    s.traffic[0].node = "ghost".into();
    assert!(matches!(
        run_scenario(&s),
        Err(SimError::ScenarioInvalid(_))
    ));

    let mut s = fixture("honest.toml");
    s.keys.pop();
    assert!(matches!(
        run_scenario(&s),
        Err(SimError::ScenarioInvalid(_))
    ));
}

fn chain(fast: bool) -> Bus {
    let p = Protection::Secured(profile_1_fv());
    let (a, b) = (id(0x100), id(0x300));
    let gw_keys = {
        use canseal::keystore::{ChannelKeys, KeyId, KeyMaterial, KeyStore, Provisioning};
        let mut s = KeyStore::new();
        s.initialize(Provisioning {
            keys: vec![
                (KeyId::new("m1"), KeyMaterial::new(MAC_KEY)),
                (KeyId::new("e1"), KeyMaterial::new(ENC_KEY)),
                (KeyId::new("m2"), KeyMaterial::new([3; 16])),
                (KeyId::new("e2"), KeyMaterial::new([4; 16])),
            ],
            channels: vec![
                ChannelKeys {
                    can_id: a,
                    mac_key: KeyId::new("m1"),
                    enc_key: KeyId::new("e1"),
                },
                ChannelKeys {
                    can_id: b,
                    mac_key: KeyId::new("m2"),
                    enc_key: KeyId::new("e2"),
                },
            ],
        })
        .unwrap();
        s
    };
    Bus::new(vec![
        EcuNode::new("src", Role::Sender, p.clone(), store(a)),
        EcuNode::new("gw", Role::Gateway, p.clone(), gw_keys)
            .route(a, b)
            .fast_path(fast),
        EcuNode::new("dst", Role::Receiver, p, store_with(b, [3; 16], [4; 16])).subscribe(b),
    ])
}

proptest! {
    #[test]
    fn multi_hop_preserves_payloads(raw in proptest::collection::vec(any::<u32>(), 1..50)) {
        let mut bus = chain(false);
        let sent: Vec<BitString> = raw.iter().map(|&v| BitString::new(u64::from(v), 32).unwrap()).collect();
        for (tick, p) in sent.iter().enumerate() {
            bus.send(tick as u64 * 2, 0, id(0x100), p).unwrap();
        }
        let got: Vec<BitString> = bus.node("dst").unwrap().delivered().iter().map(|(_, p)| *p).collect();
        prop_assert_eq!(got, sent);
    }

    #[test]
    fn fast_path_forwards_tampered_payload_bits(v in any::<u32>(), bit in 0usize..64) {
        let mut bus = chain(true);
        let p = BitString::new(u64::from(v), 32).unwrap();
        let wire = bus.node_mut(0).secure(id(0x100), &p).unwrap();
        bus.inject(0, "attacker", wire.flip_bit(bit));
        prop_assert_eq!(bus.node("dst").unwrap().delivered().len(), 1);
    }
}
