use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use hbhc_core::heartbeat::{heartbeat_gen, FreshnessMode, HeartbeatConfig};
use hbhc_core::keys::{create_root, CredentialIssuer};
use hbhc_core::verify::{create_auth_proof, ProofWire, NONCE_LEN};
use hbhc_core::{AgentId, AgentIdentity, Credential, Heartbeat};
use serde::Serialize;

use crate::server::{ChallengeResponse, RegisterRequest, VerifyRequest, VerifyResponse};
use crate::ServiceError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchConfig {
    /// Base URL, e.g. `http://127.0.0.1:8080`.
    pub target: String,
    pub concurrency: usize,
    pub requests: usize,
    /// Distinct children the proofs rotate through.
    pub children: usize,
    /// Must match the server's heartbeat interval.
    pub interval_ms: u64,
    pub seed: [u8; 32],
    /// Keep every request and response for later replay.
    pub keep_records: bool,
}

impl BenchConfig {
    pub fn new(target: impl Into<String>, concurrency: usize, requests: usize) -> Self {
        Self {
            target: target.into(),
            concurrency,
            requests,
            children: 64,
            interval_ms: 10_000,
            seed: [0x42; 32],
            keep_records: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BenchRecord {
    pub proof: ProofWire,
    pub challenge: ChallengeResponse,
    pub response: VerifyResponse,
    pub status: u16,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub concurrency: usize,
    pub requests: usize,
    pub completed: usize,
    pub accepted: usize,
    pub rejected: usize,
    /// Connection failures and unparseable responses.
    pub transport_errors: usize,
    /// Responses other than 200.
    pub http_errors: usize,
    pub mean_ms: f64,
    pub p99_ms: f64,
    pub rps: f64,
    pub wall_ms: u64,
    #[serde(skip)]
    pub records: Vec<BenchRecord>,
}

impl BenchReport {
    pub fn errors(&self) -> usize {
        self.transport_errors + self.http_errors
    }
}

struct Client {
    http: reqwest::Client,
    base: String,
    parent: AgentIdentity,
    children: Vec<(Credential, AgentIdentity)>,
    hb_cfg: HeartbeatConfig,
    heartbeat: Mutex<Option<Heartbeat>>,
}

enum Failure {
    Transport,
    Http,
}

impl Client {
    fn current_heartbeat(&self) -> Heartbeat {
        let now = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_millis() as u64);
        let epoch = self.hb_cfg.epoch_at(now);
        let mut slot = self.heartbeat.lock().expect("lock poisoned");
        match &*slot {
            Some(hb) if hb.epoch == epoch => hb.clone(),
            _ => {
                let hb = heartbeat_gen(&self.parent, now, &self.hb_cfg)
                    .expect("wall clock far from the sentinel");
                *slot = Some(hb.clone());
                hb
            }
        }
    }

    async fn flow(&self, i: usize) -> Result<BenchRecord, Failure> {
        let challenge: ChallengeResponse = self
            .http
            .post(format!("{}/challenge", self.base))
            .send()
            .await
            .map_err(|_| Failure::Transport)?
            .json()
            .await
            .map_err(|_| Failure::Transport)?;
        let nonce: [u8; NONCE_LEN] = hex::decode(&challenge.challenge_hex)
            .ok()
            .and_then(|v| v.try_into().ok())
            .ok_or(Failure::Transport)?;
        let (cred, child) = &self.children[i % self.children.len()];
        let proof = create_auth_proof(&child.identity_sk, cred, &self.current_heartbeat(), &nonce);
        let req = VerifyRequest {
            proof: proof.into(),
            challenge_hex: challenge.challenge_hex.clone(),
        };
        let resp = self
            .http
            .post(format!("{}/verify", self.base))
            .json(&req)
            .send()
            .await
            .map_err(|_| Failure::Transport)?;
        let status = resp.status().as_u16();
        if status != 200 {
            return Err(Failure::Http);
        }
        let response: VerifyResponse = resp.json().await.map_err(|_| Failure::Transport)?;
        Ok(BenchRecord {
            proof: req.proof,
            challenge,
            response,
            status,
        })
    }
}

/// Registers a parent derived from `cfg.seed`, then runs `requests` full
/// authentication flows from `concurrency` workers.
pub async fn bench(cfg: &BenchConfig) -> Result<BenchReport, ServiceError> {
    if cfg.concurrency == 0 || cfg.requests == 0 || cfg.children == 0 {
        return Err(ServiceError::Config(
            "concurrency, requests and children must be positive".into(),
        ));
    }
    let parent = create_root(AgentId::new("bench-parent")?, &cfg.seed)?;
    let mut issuer = CredentialIssuer::new(&parent);
    let children = (0..cfg.children)
        .map(|i| issuer.issue(&AgentId::new(format!("bench-parent.{i}"))?, 0))
        .collect::<Result<Vec<_>, _>>()?;
    let http = reqwest::Client::builder()
        .pool_max_idle_per_host(cfg.concurrency)
        .timeout(Duration::from_secs(60))
        .build()
        .map_err(|e| ServiceError::Client(e.to_string()))?;
    let base = cfg.target.trim_end_matches('/').to_string();
    let reg = RegisterRequest {
        parent_id: parent.agent_id.to_string(),
        hpk_hex: parent.heartbeat_pk.to_hex(),
    };
    let resp = http
        .post(format!("{base}/parents"))
        .json(&reg)
        .send()
        .await
        .map_err(|e| ServiceError::Client(e.to_string()))?;
    if !resp.status().is_success() {
        return Err(ServiceError::Client(format!(
            "parent registration failed: {}",
            resp.status()
        )));
    }

    let client = Arc::new(Client {
        http,
        base,
        parent,
        children,
        hb_cfg: HeartbeatConfig::new(cfg.interval_ms, FreshnessMode::TimeEpoch)?,
        heartbeat: Mutex::new(None),
    });
    let next = Arc::new(AtomicUsize::new(0));
    let start = Instant::now();
    let workers: Vec<_> = (0..cfg.concurrency.min(cfg.requests))
        .map(|_| {
            let client = client.clone();
            let next = next.clone();
            let total = cfg.requests;
            tokio::spawn(async move {
                let mut out = Vec::new();
                loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= total {
                        return out;
                    }
                    let t = Instant::now();
                    let r = client.flow(i).await;
                    out.push((t.elapsed(), r));
                }
            })
        })
        .collect();

    let mut report = BenchReport {
        concurrency: cfg.concurrency,
        requests: cfg.requests,
        completed: 0,
        accepted: 0,
        rejected: 0,
        transport_errors: 0,
        http_errors: 0,
        mean_ms: 0.0,
        p99_ms: 0.0,
        rps: 0.0,
        wall_ms: 0,
        records: Vec::new(),
    };
    let mut latencies = Vec::with_capacity(cfg.requests);
    for w in workers {
        let results = w.await.map_err(|e| ServiceError::Runtime(e.to_string()))?;
        for (elapsed, r) in results {
            match r {
                Ok(rec) => {
                    report.completed += 1;
                    latencies.push(elapsed.as_secs_f64() * 1e3);
                    if rec.response.accepted() {
                        report.accepted += 1;
                    } else {
                        report.rejected += 1;
                    }
                    if cfg.keep_records {
                        report.records.push(rec);
                    }
                }
                Err(Failure::Transport) => report.transport_errors += 1,
                Err(Failure::Http) => report.http_errors += 1,
            }
        }
    }
    let wall = start.elapsed();
    report.wall_ms = wall.as_millis() as u64;
    latencies.sort_by(f64::total_cmp);
    if !latencies.is_empty() {
        report.mean_ms = latencies.iter().sum::<f64>() / latencies.len() as f64;
        let idx = ((latencies.len() as f64 * 0.99).ceil() as usize).clamp(1, latencies.len()) - 1;
        report.p99_ms = latencies[idx];
    }
    report.rps = report.completed as f64 / wall.as_secs_f64().max(1e-9);
    Ok(report)
}
