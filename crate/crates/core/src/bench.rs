//! Latency of the full secure and verify pipelines, one frame per sample.

use std::hint::black_box;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitString;
use crate::can::{CanFrame, CanId};
use crate::codec::{secure_frame, verify_frame};
use crate::freshness::FreshnessState;
use crate::keystore::{ChannelKeys, KeyId, KeyMaterial, KeyStore, Provisioning};
use crate::profile::ValidatedProfile;

pub const MIN_ITERATIONS: u64 = 10_000;
const WARMUP: u64 = 1_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Operation {
    Secure,
    Verify,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub operation: Operation,
    pub profile: String,
    pub iterations: u64,
    pub median_us: f64,
    pub p95_us: f64,
    pub mean_us: f64,
    pub hardware: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BenchError {
    #[error("at least {MIN_ITERATIONS} iterations are required, got {0}")]
    TooFewIterations(u64),
}

fn summarize(
    operation: Operation,
    profile: &str,
    mut nanos: Vec<u64>,
    hardware: &str,
) -> BenchReport {
    nanos.sort_unstable();
    let n = nanos.len();
    let at = |q: f64| nanos[((q * n as f64).ceil() as usize).clamp(1, n) - 1] as f64 / 1e3;
    BenchReport {
        operation,
        profile: profile.to_string(),
        iterations: n as u64,
        median_us: nanos[n / 2] as f64 / 1e3,
        p95_us: at(0.95),
        mean_us: nanos.iter().sum::<u64>() as f64 / n as f64 / 1e3,
        hardware: hardware.to_string(),
    }
}

fn bench_keys(rng: &mut ChaCha8Rng, can_id: CanId) -> KeyStore {
    let (mut mac, mut enc) = ([0u8; 16], [0u8; 16]);
    rng.fill(&mut mac);
    rng.fill(&mut enc);
    let mut keys = KeyStore::new();
    keys.initialize(Provisioning {
        keys: vec![
            (KeyId::new("mac"), KeyMaterial::new(mac)),
            (KeyId::new("enc"), KeyMaterial::new(enc)),
        ],
        channels: vec![ChannelKeys {
            can_id,
            mac_key: KeyId::new("mac"),
            enc_key: KeyId::new("enc"),
        }],
    })
    .expect("bench provisioning is consistent");
    keys
}

fn freshness(profile: &ValidatedProfile, can_id: CanId) -> Option<FreshnessState> {
    profile.freshness_bits().map(|bits| {
        FreshnessState::new(can_id, bits, profile.layout().fvt_bits).expect("validated profile")
    })
}

/// Measures `secure_frame` and `verify_frame` separately, each over
/// `iterations` timed calls after an untimed warmup. Verification runs
/// over frames secured beforehand, in order, so every call succeeds.
pub fn run_bench(
    profile: &ValidatedProfile,
    iterations: u64,
    seed: u64,
) -> Result<[BenchReport; 2], BenchError> {
    if iterations < MIN_ITERATIONS {
        return Err(BenchError::TooFewIterations(iterations));
    }
    let pin = pin_to_current_cpu();
    let hardware = hardware_note(pin.as_ref().map(|p| p.cpu));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let can_id = CanId::new(0x100).expect("constant");
    let keys = bench_keys(&mut rng, can_id);
    let bits = profile.layout().payload_bits;
    let total = (WARMUP + iterations) as usize;
    let payloads: Vec<BitString> = (0..total)
        .map(|_| BitString::low_bits(rng.random(), bits).expect("bits <= 64"))
        .collect();

    let mut tx = freshness(profile, can_id);
    let mut frames: Vec<CanFrame> = Vec::with_capacity(total);
    let mut secure_ns = Vec::with_capacity(iterations as usize);
    for (i, p) in payloads.iter().enumerate() {
        let start = Instant::now();
        let frame = secure_frame(can_id, black_box(p), profile, &keys, tx.as_mut());
        let elapsed = start.elapsed();
        frames.push(black_box(frame).expect("bench payloads fit the layout"));
        if i as u64 >= WARMUP {
            secure_ns.push(elapsed.as_nanos() as u64);
        }
    }

    let mut rx = freshness(profile, can_id);
    let mut verify_ns = Vec::with_capacity(iterations as usize);
    for (i, f) in frames.iter().enumerate() {
        let start = Instant::now();
        let out = verify_frame(black_box(f), profile, &keys, rx.as_mut());
        let elapsed = start.elapsed();
        assert_eq!(
            black_box(out).as_ref(),
            Ok(&payloads[i]),
            "bench frame {i} failed to verify"
        );
        if i as u64 >= WARMUP {
            verify_ns.push(elapsed.as_nanos() as u64);
        }
    }
    drop(pin);

    Ok([
        summarize(Operation::Secure, profile.name(), secure_ns, &hardware),
        summarize(Operation::Verify, profile.name(), verify_ns, &hardware),
    ])
}

fn hardware_note(pinned: Option<usize>) -> String {
    let cpu = std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|s| {
            s.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split_once(':'))
                .map(|(_, v)| v.trim().to_string())
        })
        .unwrap_or_else(|| std::env::consts::ARCH.to_string());
    let threads = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    let pin = match pinned {
        Some(c) => format!("pinned to logical cpu {c}"),
        None => "not pinned".to_string(),
    };
    format!("{cpu}, {threads} logical cpus, {pin}")
}

/// Restores the previous affinity mask on drop.
struct Pin {
    cpu: usize,
    #[cfg(target_os = "linux")]
    previous: libc::cpu_set_t,
}

#[cfg(target_os = "linux")]
fn pin_to_current_cpu() -> Option<Pin> {
    // SAFETY: cpu_set_t is plain data; the libc calls only read and write
    // the sets passed to them and affect the calling thread.
    unsafe {
        let cpu = libc::sched_getcpu();
        if cpu < 0 {
            return None;
        }
        let mut previous: libc::cpu_set_t = std::mem::zeroed();
        if libc::sched_getaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &mut previous) != 0 {
            return None;
        }
        let mut set: libc::cpu_set_t = std::mem::zeroed();
        libc::CPU_SET(cpu as usize, &mut set);
        if libc::sched_setaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &set) != 0 {
            return None;
        }
        Some(Pin {
            cpu: cpu as usize,
            previous,
        })
    }
}

#[cfg(target_os = "linux")]
impl Drop for Pin {
    fn drop(&mut self) {
        // SAFETY: restores a mask previously returned by sched_getaffinity.
        unsafe {
            libc::sched_setaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &self.previous);
        }
    }
}

#[cfg(not(target_os = "linux"))]
fn pin_to_current_cpu() -> Option<Pin> {
    None
}
