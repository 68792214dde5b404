mod keyfile;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use hbhc_core::heartbeat::{
    heartbeat_gen, precompute, revocation_heartbeat, sequence_heartbeat_gen, HeartbeatConfig,
};
use hbhc_core::keys::{create_root, issue_credential};
use hbhc_core::verify::{create_auth_proof, verify_auth, DEFAULT_CHALLENGE_TTL_MS, NONCE_LEN};
use hbhc_core::{
    AgentId, AuthProof, Challenge, Credential, FreshnessMode, FreshnessPolicy, Heartbeat,
    PublicPoint, VerifierState,
};
use hbhc_service::{BenchConfig, ServiceConfig};
use hbhc_sim::experiments::{run_experiment, NAMES};
use hbhc_sim::SimConfig;
use rand::RngCore;
use serde_json::json;

use keyfile::{read_identity, with_suffix, write_identity};

#[derive(Parser)]
#[command(
    name = "hbhc",
    version,
    about = "Heartbeat-bound hierarchical credentials"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Time,
    Sequence,
}

#[derive(Subcommand)]
enum Command {
    /// Create a root identity.
    Keygen {
        /// 32-byte seed; random when omitted.
        #[arg(long)]
        seed_hex: Option<String>,
        #[arg(long, default_value = "root")]
        agent_id: String,
        /// Secret file; public keys go to `<out>.pub`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Derive a child identity and issue its credential.
    DeriveChild {
        #[arg(long)]
        parent_file: PathBuf,
        #[arg(long)]
        child_id: String,
        #[arg(long, default_value_t = 0)]
        issued_at_epoch: u64,
        /// Secret file; also writes `<out>.pub` and `<out>.cred`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Emit heartbeat frames as hex, one per line.
    Heartbeat {
        #[arg(long)]
        identity_file: PathBuf,
        #[arg(long)]
        now_ms: Option<u64>,
        #[arg(long, default_value_t = 10_000)]
        interval_ms: u64,
        #[arg(long, conflicts_with_all = ["seq", "precompute"])]
        sentinel: bool,
        #[arg(long, conflicts_with = "precompute")]
        seq: Option<u64>,
        /// Emit this many consecutive epochs starting at the current one.
        #[arg(long)]
        precompute: Option<u64>,
    },
    /// Build an authentication proof.
    Prove {
        #[arg(long)]
        child_file: PathBuf,
        #[arg(long)]
        credential_file: PathBuf,
        #[arg(long)]
        heartbeat_hex: String,
        #[arg(long)]
        challenge_hex: String,
    },
    /// Verify a proof offline; exit 0 on accept, 1 on reject.
    Verify {
        /// Proof JSON, inline or a path to a file.
        #[arg(long)]
        proof_json: String,
        #[arg(long)]
        parent_hpk_hex: String,
        #[arg(long)]
        challenge_hex: String,
        #[arg(long)]
        now_ms: Option<u64>,
        #[arg(long, default_value_t = 10_000)]
        interval_ms: u64,
        #[arg(long, default_value_t = 3)]
        max_age: u64,
        #[arg(long, default_value_t = 0)]
        grace: u64,
        #[arg(long, value_enum, default_value = "time")]
        mode: Mode,
        #[arg(long, default_value_t = 3)]
        max_gap: u64,
        /// Last accepted sequence number for this child (sequence mode).
        #[arg(long)]
        last_seq: Option<u64>,
    },
    /// Run the swarm simulator from a JSON config.
    Simulate {
        #[arg(long)]
        config_file: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        csv_out: Option<PathBuf>,
    },
    /// Run one experiment or `all`; exit 1 if any check fails.
    Experiment {
        name: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = "results")]
        out_dir: PathBuf,
    },
    /// Start the HTTP verifier (HBHC_BIND and HBHC_PORT apply).
    Serve {
        #[arg(long)]
        bind: Option<String>,
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        interval_ms: Option<u64>,
        #[arg(long)]
        max_age: Option<u64>,
        #[arg(long)]
        challenge_ttl_ms: Option<u64>,
    },
    /// Load-test a running verifier.
    Bench {
        #[arg(long, default_value = "http://127.0.0.1:8080")]
        url: String,
        #[arg(long, default_value_t = 100)]
        concurrency: usize,
        #[arg(long, default_value_t = 1_000)]
        requests: usize,
        #[arg(long, default_value_t = 64)]
        children: usize,
        #[arg(long, default_value_t = 10_000)]
        interval_ms: u64,
    },
}

fn wall_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

/// `HBHC_SEED` wins over the flag.
fn seed_override(flag: Option<u64>) -> Result<Option<u64>> {
    match std::env::var("HBHC_SEED") {
        Ok(v) => {
            Ok(Some(v.parse().with_context(|| {
                format!("HBHC_SEED: not an integer: {v:?}")
            })?))
        }
        Err(_) => Ok(flag),
    }
}

fn decode_fixed<const N: usize>(name: &str, s: &str) -> Result<[u8; N]> {
    let v = hex::decode(s.trim()).with_context(|| format!("{name}: not hex"))?;
    v.try_into()
        .map_err(|v: Vec<u8>| anyhow::anyhow!("{name}: expected {N} bytes, got {}", v.len()))
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Keygen {
            seed_hex,
            agent_id,
            out,
        } => {
            let seed = match seed_hex {
                Some(h) => decode_fixed::<32>("seed_hex", &h)?,
                None => {
                    let mut s = [0u8; 32];
                    rand::rngs::OsRng.fill_bytes(&mut s);
                    s
                }
            };
            let root = create_root(AgentId::new(agent_id)?, &seed)?;
            print_json(&write_identity(&out, &root)?)?;
        }
        Command::DeriveChild {
            parent_file,
            child_id,
            issued_at_epoch,
            out,
        } => {
            let parent = read_identity(&parent_file)?;
            let (cred, child) =
                issue_credential(&parent, &AgentId::new(child_id)?, issued_at_epoch)?;
            let public = write_identity(&out, &child)?;
            let cred_path = with_suffix(&out, ".cred");
            std::fs::write(&cred_path, cred.to_text())
                .with_context(|| format!("writing {}", cred_path.display()))?;
            print_json(&json!({ "identity": public, "credential_file": cred_path }))?;
        }
        Command::Heartbeat {
            identity_file,
            now_ms,
            interval_ms,
            sentinel,
            seq,
            precompute: count,
        } => {
            let parent = read_identity(&identity_file)?;
            let now = now_ms.unwrap_or_else(wall_ms);
            let frames: Vec<Heartbeat> = if sentinel {
                vec![revocation_heartbeat(&parent)]
            } else if let Some(s) = seq {
                vec![sequence_heartbeat_gen(&parent, s)?]
            } else {
                let cfg = HeartbeatConfig::new(interval_ms, FreshnessMode::TimeEpoch)?;
                match count {
                    Some(n) => precompute(&parent, cfg.epoch_at(now), n, &cfg)?.heartbeats,
                    None => vec![heartbeat_gen(&parent, now, &cfg)?],
                }
            };
            for hb in frames {
                println!("{}", hb.to_hex());
            }
        }
        Command::Prove {
            child_file,
            credential_file,
            heartbeat_hex,
            challenge_hex,
        } => {
            let child = read_identity(&child_file)?;
            let text = std::fs::read_to_string(&credential_file)
                .with_context(|| format!("reading {}", credential_file.display()))?;
            let cred = Credential::from_text(&text)?;
            if cred.child_pk != child.identity_pk {
                bail!("credential was issued to a different key");
            }
            let hb = Heartbeat::from_hex(heartbeat_hex.trim())?;
            let nonce = decode_fixed::<NONCE_LEN>("challenge_hex", &challenge_hex)?;
            print_json(&create_auth_proof(&child.identity_sk, &cred, &hb, &nonce))?;
        }
        Command::Verify {
            proof_json,
            parent_hpk_hex,
            challenge_hex,
            now_ms,
            interval_ms,
            max_age,
            grace,
            mode,
            max_gap,
            last_seq,
        } => {
            let text = if proof_json.trim_start().starts_with('{') {
                proof_json
            } else {
                std::fs::read_to_string(&proof_json)
                    .with_context(|| format!("reading {proof_json}"))?
            };
            let proof: AuthProof = serde_json::from_str(&text).context("proof_json")?;
            let hpk = PublicPoint::from_hex(parent_hpk_hex.trim()).context("parent_hpk_hex")?;
            let nonce = decode_fixed::<NONCE_LEN>("challenge_hex", &challenge_hex)?;
            let policy = match mode {
                Mode::Time => FreshnessPolicy::time_epoch(interval_ms, max_age),
                Mode::Sequence => FreshnessPolicy::sequence(interval_ms, max_gap),
            }
            .with_grace(grace);
            policy.validate().map_err(anyhow::Error::msg)?;
            let now = now_ms.unwrap_or_else(wall_ms);
            let mut state = VerifierState::new();
            state.cache_parent_key(proof.credential.parent_id.clone(), hpk);
            if let Some(s) = last_seq {
                state.set_sequence_floor(proof.credential.child_id.clone(), s);
            }
            let mut challenge = Challenge::from_nonce(nonce, now, DEFAULT_CHALLENGE_TTL_MS);
            let verdict = verify_auth(&proof, &mut state, &mut challenge, now, &policy);
            let out = match &verdict {
                Ok(a) => {
                    json!({ "result": "accept", "reason": null, "heartbeat_age_epochs": a.age_epochs })
                }
                Err(r) => {
                    json!({ "result": "reject", "reason": r.reason.as_str(), "heartbeat_age_epochs": r.age_epochs })
                }
            };
            print_json(&out)?;
            return Ok(if verdict.is_ok() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            });
        }
        Command::Simulate {
            config_file,
            seed,
            csv_out,
        } => {
            let text = std::fs::read_to_string(&config_file)
                .with_context(|| format!("reading {}", config_file.display()))?;
            let mut cfg: SimConfig = serde_json::from_str(&text).context("simulator config")?;
            if let Some(s) = seed_override(seed)? {
                cfg.rng_seed = s;
            }
            let trace = hbhc_sim::run(&cfg)?;
            if let Some(path) = csv_out {
                let f = std::fs::File::create(&path)
                    .with_context(|| format!("creating {}", path.display()))?;
                trace.write_csv(std::io::BufWriter::new(f))?;
            }
            let windows: Vec<_> = trace
                .zombie_windows()
                .iter()
                .map(|w| {
                    json!({
                        "revoked": trace.agents[w.revoked].id,
                        "t_r_ms": w.t_r_ms,
                        "w_z_ms": w.w_z_ms,
                        "descendants": w.descendants,
                        "denied_at_end": w.denied_at_end,
                    })
                })
                .collect();
            print_json(&json!({
                "seed": cfg.rng_seed,
                "agents": trace.agents.len(),
                "attempts": trace.attempts.len(),
                "legitimate_attempts": trace.legitimate_attempts(),
                "legitimate_denied": trace.legitimate_denied(),
                "fprr": trace.fprr(),
                "max_consecutive_missed": trace.max_consecutive_missed,
                "zombie_windows": windows,
            }))?;
        }
        Command::Experiment {
            name,
            seed,
            out_dir,
        } => {
            let seed = seed_override(Some(seed))?.unwrap_or(seed);
            let names: Vec<&str> = if name == "all" {
                NAMES.to_vec()
            } else if NAMES.contains(&name.as_str()) {
                vec![name.as_str()]
            } else {
                bail!(
                    "unknown experiment {name:?}; expected one of: all, {}",
                    NAMES.join(", ")
                );
            };
            let mut ok = true;
            for n in names {
                let report = run_experiment(n, seed).expect("name checked above");
                report
                    .write_to(&out_dir)
                    .with_context(|| format!("writing to {}", out_dir.display()))?;
                print!("{}", report.summary());
                ok &= report.passed();
            }
            return Ok(if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            });
        }
        Command::Serve {
            bind,
            port,
            interval_ms,
            max_age,
            challenge_ttl_ms,
        } => {
            let mut cfg = ServiceConfig::from_env()?;
            if let Some(b) = bind {
                cfg.bind = b
                    .parse()
                    .with_context(|| format!("--bind: bad address {b:?}"))?;
            }
            if let Some(p) = port {
                cfg.port = p;
            }
            if interval_ms.is_some() || max_age.is_some() {
                cfg.policy = FreshnessPolicy::time_epoch(
                    interval_ms.unwrap_or(cfg.policy.interval_ms),
                    max_age.unwrap_or(cfg.policy.max_age_epochs),
                );
            }
            if let Some(t) = challenge_ttl_ms {
                cfg.challenge_ttl_ms = t;
            }
            tokio::runtime::Runtime::new()?.block_on(hbhc_service::serve(cfg))?;
        }
        Command::Bench {
            url,
            concurrency,
            requests,
            children,
            interval_ms,
        } => {
            let mut cfg = BenchConfig::new(url, concurrency, requests);
            cfg.children = children;
            cfg.interval_ms = interval_ms;
            let report = tokio::runtime::Runtime::new()?.block_on(hbhc_service::bench(&cfg))?;
            print_json(&report)?;
            if report.errors() > 0 {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if matches!(cli.command, Command::Serve { .. }) {
        tracing_subscriber::fmt()
            .with_env_filter(
                tracing_subscriber::EnvFilter::try_from_default_env()
                    .unwrap_or_else(|_| "info".into()),
            )
            .init();
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", json!({ "error": format!("{e:#}") }));
            ExitCode::from(2)
        }
    }
}
