use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use canseal::attack::{run_matrix, AttackParams, MitigationMatrix};
use canseal::bench::{run_bench, MIN_ITERATIONS};
use canseal::bits::BitString;
use canseal::can::{CanFrame, CanId};
use canseal::candump::{parse_candump_line, CandumpRecord};
use canseal::codec::{secure_frame, verify_frame};
use canseal::freshness::FreshnessState;
use canseal::keystore::{KeyStore, ProvisioningFile};
use canseal::profile::{builtin_profile, load_profile, ValidatedProfile};
use canseal::sim::{run_scenario, Scenario};
use clap::{Args, Parser, Subcommand};

/// Secured CAN frames: Chaskey MAC then SPECK64/128.
#[derive(Parser)]
#[command(name = "canseal", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Secure plain candump lines (payload bytes in the data field).
    Secure(CodecArgs),
    /// Verify secured candump lines; accepted payloads go to the output.
    Verify(CodecArgs),
    /// Run a scenario file on the simulated bus.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for trace.log and decisions.jsonl; without it the
        /// candump trace goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every attack campaign against two profiles and print the
    /// mitigation matrix.
    AttackMatrix {
        /// Authentication-only profile (file or built-in name).
        #[arg(long, default_value = "secoc-baseline-fv")]
        baseline: String,
        /// Encrypting profile (file or built-in name).
        #[arg(long, default_value = "profile-1-fv")]
        profile: String,
        #[arg(long, default_value_t = AttackParams::default().seed)]
        seed: u64,
        /// Genuine frames per campaign.
        #[arg(long, default_value_t = AttackParams::default().frames)]
        frames: u64,
        /// Forging and fuzzing attempts.
        #[arg(long, default_value_t = AttackParams::default().forgeries)]
        forgeries: u64,
        /// Matrix JSON to compare against; a difference exits with 3.
        #[arg(long)]
        expect: Option<PathBuf>,
        #[arg(long)]
        json: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time the full secure and verify pipelines.
    Bench {
        #[arg(long, default_value = "profile-1")]
        profile: String,
        #[arg(long, default_value_t = 100_000)]
        iterations: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
    /// Profile utilities.
    Profile {
        #[command(subcommand)]
        command: ProfileCommand,
    },
}

#[derive(Subcommand)]
enum ProfileCommand {
    /// Check a profile and print its frame layout.
    Validate { profile: String },
}

#[derive(Args)]
struct CodecArgs {
    /// Profile file or built-in name.
    #[arg(long)]
    profile: String,
    /// Key provisioning file (TOML).
    #[arg(long)]
    keys: PathBuf,
    /// Input file; standard input when absent.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Data(String),
    Rejected(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Data(_) => 2,
            Failure::Rejected(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Data(m) | Failure::Rejected(m) => m,
        }
    }
}

fn io_err(path: &Path, e: io::Error) -> Failure {
    Failure::Config(format!("{}: {e}", path.display()))
}

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn resolve_profile(arg: &str) -> Result<ValidatedProfile, Failure> {
    let path = Path::new(arg);
    let profile = if !path.exists() {
        builtin_profile(arg).ok_or_else(|| {
            Failure::Config(format!(
                "{arg}: no such file and no built-in profile of that name"
            ))
        })?
    } else {
        load_profile(&read_file(path)?).map_err(|e| Failure::Config(format!("{arg}: {e}")))?
    };
    ValidatedProfile::new(profile).map_err(|e| Failure::Config(format!("{arg}: {e}")))
}

fn load_keys(path: &Path) -> Result<KeyStore, Failure> {
    let bad = |e: String| Failure::Config(format!("{}: {e}", path.display()));
    let file = ProvisioningFile::parse(&read_file(path)?).map_err(|e| bad(e.to_string()))?;
    let mut store = KeyStore::new();
    store
        .initialize(file.to_provisioning().map_err(|e| bad(e.to_string()))?)
        .map_err(|e| bad(e.to_string()))?;
    Ok(store)
}

fn open_input(path: Option<&Path>) -> Result<Box<dyn BufRead>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufReader::new(fs::File::open(p).map_err(|e| io_err(p, e))?)),
        None => Box::new(BufReader::new(io::stdin())),
    })
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(
            fs::File::create(p).map_err(|e| io_err(p, e))?,
        )),
        None => Box::new(io::BufWriter::new(io::stdout())),
    })
}

/// Non-empty input lines with their 1-based line numbers.
fn records(input: Box<dyn BufRead>) -> Result<Vec<(usize, CandumpRecord)>, Failure> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let n = i + 1;
        let line = line.map_err(|e| Failure::Config(format!("reading input: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = parse_candump_line(&line).map_err(|e| Failure::Data(format!("line {n}: {e}")))?;
        out.push((n, rec));
    }
    Ok(out)
}

struct Channels<'a> {
    profile: &'a ValidatedProfile,
    states: BTreeMap<CanId, FreshnessState>,
}

impl<'a> Channels<'a> {
    fn new(profile: &'a ValidatedProfile) -> Self {
        Channels {
            profile,
            states: BTreeMap::new(),
        }
    }

    fn state(&mut self, can_id: CanId) -> Option<&mut FreshnessState> {
        let bits = self.profile.freshness_bits()?;
        let fvt = self.profile.layout().fvt_bits;
        Some(self.states.entry(can_id).or_insert_with(|| {
            FreshnessState::new(can_id, bits, fvt)
                .expect("validated profile has consistent freshness widths")
        }))
    }
}

fn write_line(out: &mut dyn Write, line: &str) -> Result<(), Failure> {
    writeln!(out, "{line}").map_err(|e| Failure::Config(format!("writing output: {e}")))
}

fn cmd_secure(args: &CodecArgs) -> Result<(), Failure> {
    let profile = resolve_profile(&args.profile)?;
    let keys = load_keys(&args.keys)?;
    let input = records(open_input(args.input.as_deref())?)?;
    let bits = profile.layout().payload_bits;
    let mut channels = Channels::new(&profile);
    let mut secured = Vec::with_capacity(input.len());
    for (n, rec) in input {
        let payload = BitString::from_bytes(rec.frame.data(), bits).map_err(|e| {
            Failure::Data(format!(
                "line {n}: payload must be {bits} bits ({} bytes): {e}",
                profile.layout().payload_bytes()
            ))
        })?;
        let can_id = rec.frame.id();
        let frame = secure_frame(can_id, &payload, &profile, &keys, channels.state(can_id))
            .map_err(|e| Failure::Data(format!("line {n}: {e}")))?;
        secured.push(CandumpRecord { frame, ..rec });
    }
    let mut out = open_output(args.out.as_deref())?;
    for rec in secured {
        write_line(&mut out, &rec.to_string())?;
    }
    out.flush()
        .map_err(|e| Failure::Config(format!("writing output: {e}")))
}

fn cmd_verify(args: &CodecArgs) -> Result<(), Failure> {
    let profile = resolve_profile(&args.profile)?;
    let keys = load_keys(&args.keys)?;
    let input = records(open_input(args.input.as_deref())?)?;
    let mut channels = Channels::new(&profile);
    let mut out = open_output(args.out.as_deref())?;
    let (total, mut accepted) = (input.len(), 0usize);
    for (n, rec) in input {
        let can_id = rec.frame.id();
        match verify_frame(&rec.frame, &profile, &keys, channels.state(can_id)) {
            Ok(payload) => {
                accepted += 1;
                let frame =
                    CanFrame::new(can_id, &payload.to_bytes()).expect("payload fits 8 bytes");
                write_line(&mut out, &CandumpRecord { frame, ..rec }.to_string())?;
                eprintln!("line {n}: accept");
            }
            Err(e) => eprintln!("line {n}: reject {:?} ({e})", e.rejection()),
        }
    }
    out.flush()
        .map_err(|e| Failure::Config(format!("writing output: {e}")))?;
    eprintln!(
        "accepted {accepted} of {total}, rejected {}",
        total - accepted
    );
    if accepted < total {
        return Err(Failure::Rejected(format!(
            "{} of {total} frames rejected",
            total - accepted
        )));
    }
    Ok(())
}

fn cmd_simulate(scenario: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<(), Failure> {
    let mut s = Scenario::from_toml(&read_file(scenario)?)
        .map_err(|e| Failure::Config(format!("{}: {e}", scenario.display())))?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    let trace =
        run_scenario(&s).map_err(|e| Failure::Config(format!("{}: {e}", scenario.display())))?;
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
            let log = dir.join("trace.log");
            fs::write(&log, trace.candump_lines()).map_err(|e| io_err(&log, e))?;
            let decisions = dir.join("decisions.jsonl");
            fs::write(&decisions, trace.decisions_jsonl()).map_err(|e| io_err(&decisions, e))?;
            println!("wrote {} and {}", log.display(), decisions.display());
        }
        None => print!("{}", trace.candump_lines()),
    }
    for (node, stats) in &trace.node_stats {
        eprintln!(
            "{node}: accepted {}, rejected {}, forwarded {}, lost {}",
            stats.accepted,
            stats.rejected_total(),
            stats.forwarded,
            stats.lost
        );
    }
    eprintln!("trace sha256 {}", trace.hash());
    Ok(())
}

fn cmd_attack_matrix(
    baseline: &str,
    profile: &str,
    params: AttackParams,
    expect: Option<&Path>,
    json: bool,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let baseline = resolve_profile(baseline)?;
    let profile = resolve_profile(profile)?;
    let expected: Option<MitigationMatrix> = match expect {
        Some(p) => Some(
            serde_json::from_str(&read_file(p)?)
                .map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?,
        ),
        None => None,
    };
    let (results, matrix) =
        run_matrix(&baseline, &profile, &params).map_err(|e| Failure::Config(e.to_string()))?;

    let text = if json {
        let doc = serde_json::json!({ "params": params, "results": results, "matrix": matrix });
        serde_json::to_string_pretty(&doc).expect("report serializes") + "\n"
    } else {
        let mut t = format!(
            "baseline {}, encrypted {}\n\n",
            baseline.name(),
            profile.name()
        );
        t.push_str(&matrix.render());
        for r in &results {
            if !r.control_succeeded {
                t.push_str(&format!(
                    "warning: {} control did not succeed in {} mode\n",
                    r.threat, r.mode
                ));
            }
            for w in &r.warnings {
                t.push_str(&format!("warning: {} ({}): {w}\n", r.threat, r.mode));
            }
        }
        t
    };
    let mut sink = open_output(out)?;
    sink.write_all(text.as_bytes())
        .and_then(|_| sink.flush())
        .map_err(|e| Failure::Config(format!("writing output: {e}")))?;

    if let Some(expected) = expected {
        if expected != matrix {
            return Err(Failure::Rejected(
                "matrix differs from the expected fixture".into(),
            ));
        }
        eprintln!("matrix matches the expected fixture");
    }
    Ok(())
}

fn cmd_bench(profile: &str, iterations: u64, seed: u64, json: bool) -> Result<(), Failure> {
    if iterations < MIN_ITERATIONS {
        return Err(Failure::Config(format!(
            "--iterations must be at least {MIN_ITERATIONS}, got {iterations}"
        )));
    }
    let profile = resolve_profile(profile)?;
    let reports =
        run_bench(&profile, iterations, seed).map_err(|e| Failure::Config(e.to_string()))?;
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&reports).expect("reports serialize")
        );
    } else {
        println!(
            "profile {}, {iterations} iterations, {}",
            profile.name(),
            reports[0].hardware
        );
        for r in &reports {
            println!(
                "{:<7} median {:>8.3} us  p95 {:>8.3} us  mean {:>8.3} us",
                format!("{:?}", r.operation).to_lowercase(),
                r.median_us,
                r.p95_us,
                r.mean_us
            );
        }
    }
    Ok(())
}

fn cmd_profile_validate(arg: &str) -> Result<(), Failure> {
    let p = resolve_profile(arg)?;
    let l = p.layout();
    println!(
        "{}: payload {} bits, FVT {} bits, MACT {} bits, encryption {}",
        p.name(),
        l.payload_bits,
        l.fvt_bits,
        l.mact_bits,
        if p.encrypts() { "SPECK64/128" } else { "none" }
    );
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Secure(args) => cmd_secure(&args),
        Command::Verify(args) => cmd_verify(&args),
        Command::Simulate {
            scenario,
            seed,
            out,
        } => cmd_simulate(&scenario, seed, out.as_deref()),
        Command::AttackMatrix {
            baseline,
            profile,
            seed,
            frames,
            forgeries,
            expect,
            json,
            out,
        } => {
            let params = AttackParams {
                seed,
                frames,
                forgeries,
                ..AttackParams::default()
            };
            cmd_attack_matrix(
                &baseline,
                &profile,
                params,
                expect.as_deref(),
                json,
                out.as_deref(),
            )
        }
        Command::Bench {
            profile,
            iterations,
            seed,
            json,
        } => cmd_bench(&profile, iterations, seed, json),
        Command::Profile {
            command: ProfileCommand::Validate { profile },
        } => cmd_profile_validate(&profile),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
