use std::collections::{HashMap, HashSet};
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use hbhc_core::verify::{evaluate, ProofWire, Rejection, Verdict, VerifierView, NONCE_LEN};
use hbhc_core::{AgentId, AuthProof, Challenge, PublicPoint, RejectReason};
use serde::{Deserialize, Serialize};
use tokio::sync::oneshot;
use tower::limit::ConcurrencyLimitLayer;

use crate::{ServiceConfig, ServiceError};

/// Milliseconds since the Unix epoch as seen by the service.
pub type Clock = Arc<dyn Fn() -> u64 + Send + Sync>;

/// Wall-clock time sampled once at startup and advanced by a monotonic timer,
/// so the service clock never steps backwards.
pub fn system_clock() -> Clock {
    let base = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64);
    let start = Instant::now();
    Arc::new(move || base + start.elapsed().as_millis() as u64)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct RegisterRequest {
    pub parent_id: String,
    pub hpk_hex: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct RegisterResponse {
    /// `registered` or `unchanged`.
    pub status: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ChallengeResponse {
    pub challenge_hex: String,
    pub ttl_ms: u64,
    pub issued_at_ms: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct VerifyRequest {
    #[serde(flatten)]
    pub proof: ProofWire,
    pub challenge_hex: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct VerifyResponse {
    /// `accept` or `reject`.
    pub result: String,
    pub reason: Option<String>,
    pub heartbeat_age_epochs: Option<i64>,
    pub verified_at_ms: u64,
}

impl VerifyResponse {
    pub fn accepted(&self) -> bool {
        self.result == "accept"
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct HealthResponse {
    pub status: String,
    pub uptime_ms: u64,
    pub verifications_total: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Registration {
    Registered,
    Unchanged,
}

/// What the challenge store knew about a nonce when a proof was checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChallengeStatus {
    Usable,
    Unknown,
    Used,
    Expired,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyOutcome {
    pub verdict: Verdict,
    pub challenge: ChallengeStatus,
    pub now_ms: u64,
}

/// Shared verifier state. Parent keys are read-mostly; the challenge store
/// and counters are mutated per entry.
pub struct VerifierService {
    config: ServiceConfig,
    clock: Clock,
    started: Instant,
    parents: RwLock<HashMap<AgentId, PublicPoint>>,
    revoked: RwLock<HashSet<AgentId>>,
    sequences: Mutex<HashMap<AgentId, u64>>,
    challenges: Mutex<HashMap<[u8; NONCE_LEN], Challenge>>,
    verifications: AtomicU64,
}

struct View<'a>(&'a VerifierService);

impl VerifierView for View<'_> {
    fn parent_key(&self, parent_id: &AgentId) -> Option<PublicPoint> {
        self.0
            .parents
            .read()
            .expect("lock poisoned")
            .get(parent_id)
            .copied()
    }

    fn is_sentinel_revoked(&self, parent_id: &AgentId) -> bool {
        self.0
            .revoked
            .read()
            .expect("lock poisoned")
            .contains(parent_id)
    }

    fn last_sequence(&self, child_id: &AgentId) -> Option<u64> {
        self.0
            .sequences
            .lock()
            .expect("lock poisoned")
            .get(child_id)
            .copied()
    }
}

impl VerifierService {
    pub fn new(config: ServiceConfig) -> Self {
        Self::with_clock(config, system_clock())
    }

    pub fn with_clock(config: ServiceConfig, clock: Clock) -> Self {
        Self {
            config,
            clock,
            started: Instant::now(),
            parents: RwLock::default(),
            revoked: RwLock::default(),
            sequences: Mutex::default(),
            challenges: Mutex::default(),
            verifications: AtomicU64::new(0),
        }
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn now_ms(&self) -> u64 {
        (self.clock)()
    }

    pub fn verifications_total(&self) -> u64 {
        self.verifications.load(Ordering::SeqCst)
    }

    pub fn register_parent(
        &self,
        parent_id: AgentId,
        hpk: PublicPoint,
    ) -> Result<Registration, ServiceError> {
        let mut parents = self.parents.write().expect("lock poisoned");
        match parents.get(&parent_id) {
            Some(existing) if *existing == hpk => Ok(Registration::Unchanged),
            Some(_) => Err(ServiceError::Conflict(format!(
                "parent {parent_id} already registered with another key"
            ))),
            None => {
                parents.insert(parent_id, hpk);
                Ok(Registration::Registered)
            }
        }
    }

    pub fn issue_challenge(&self) -> Challenge {
        let now = self.now_ms();
        let ttl = self.config.challenge_ttl_ms;
        let mut store = self.challenges.lock().expect("lock poisoned");
        if store.len() % 4_096 == 4_095 {
            // entries well past expiry only matter for telling 410 from "unknown"
            store.retain(|_, c| now.saturating_sub(c.issued_at_ms) <= 2 * c.ttl_ms);
        }
        loop {
            let ch = Challenge::issue(now, ttl, &mut rand::thread_rng());
            if !store.contains_key(&ch.nonce) {
                store.insert(ch.nonce, ch.clone());
                return ch;
            }
        }
    }

    /// Same decision as offline `verify_auth` at the service clock; the
    /// challenge is consumed atomically on acceptance.
    pub fn verify(&self, proof: &AuthProof, nonce: [u8; NONCE_LEN]) -> VerifyOutcome {
        let now = self.now_ms();
        let snapshot = self
            .challenges
            .lock()
            .expect("lock poisoned")
            .get(&nonce)
            .cloned();
        let challenge = snapshot
            .clone()
            .unwrap_or_else(|| Challenge::unknown(nonce));
        let mut verdict = evaluate(proof, &View(self), &challenge, now, &self.config.policy);

        match &mut verdict {
            Ok(accepted) => {
                let age = accepted.age_epochs;
                let mut sequences = self.sequences.lock().expect("lock poisoned");
                let mut store = self.challenges.lock().expect("lock poisoned");
                let regressed = accepted.sequence.is_some_and(|s| {
                    sequences
                        .get(&accepted.child_id)
                        .is_some_and(|last| s <= *last)
                });
                match store.get_mut(&nonce) {
                    // a concurrent request won the race for this challenge
                    Some(c) if !c.is_usable_at(now) => {
                        verdict = Err(Rejection::plain(RejectReason::ChallengeInvalid, age))
                    }
                    None => verdict = Err(Rejection::plain(RejectReason::ChallengeInvalid, age)),
                    Some(_) if regressed => {
                        verdict = Err(Rejection::plain(RejectReason::SequenceRegression, age))
                    }
                    Some(c) => {
                        c.used = true;
                        if let Some(s) = accepted.sequence {
                            sequences.insert(accepted.child_id.clone(), s);
                        }
                    }
                }
            }
            Err(rejection) => {
                if let Some(parent) = &rejection.latch_sentinel {
                    self.revoked
                        .write()
                        .expect("lock poisoned")
                        .insert(parent.clone());
                }
            }
        }
        self.verifications.fetch_add(1, Ordering::SeqCst);

        let status = if matches!(&verdict, Err(r) if r.reason == RejectReason::ChallengeInvalid) {
            let current = self
                .challenges
                .lock()
                .expect("lock poisoned")
                .get(&nonce)
                .cloned();
            match current.or(snapshot) {
                None => ChallengeStatus::Unknown,
                Some(c) if c.used => ChallengeStatus::Used,
                Some(c) if c.is_expired_at(now) => ChallengeStatus::Expired,
                Some(_) => ChallengeStatus::Usable,
            }
        } else {
            ChallengeStatus::Usable
        };
        VerifyOutcome {
            verdict,
            challenge: status,
            now_ms: now,
        }
    }

    pub fn health(&self) -> HealthResponse {
        HealthResponse {
            status: "ok".into(),
            uptime_ms: self.started.elapsed().as_millis() as u64,
            verifications_total: self.verifications_total(),
        }
    }
}

fn error(status: StatusCode, msg: impl ToString) -> Response {
    (
        status,
        Json(serde_json::json!({ "error": msg.to_string() })),
    )
        .into_response()
}

fn parse<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, Response> {
    serde_json::from_slice(body)
        .map_err(|e| error(StatusCode::BAD_REQUEST, format!("malformed request: {e}")))
}

async fn register(State(svc): State<Arc<VerifierService>>, body: Bytes) -> Response {
    let req: RegisterRequest = match parse(&body) {
        Ok(r) => r,
        Err(resp) => return resp,
    };
    let id = match AgentId::new(req.parent_id) {
        Ok(id) => id,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("parent_id: {e}")),
    };
    let hpk = match PublicPoint::from_hex(&req.hpk_hex) {
        Ok(p) => p,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("hpk_hex: {e}")),
    };
    match svc.register_parent(id, hpk) {
        Ok(reg) => {
            let status = if reg == Registration::Registered {
                "registered"
            } else {
                "unchanged"
            };
            Json(RegisterResponse {
                status: status.into(),
            })
            .into_response()
        }
        Err(e) => error(StatusCode::CONFLICT, e),
    }
}

async fn challenge(State(svc): State<Arc<VerifierService>>) -> Json<ChallengeResponse> {
    let ch = svc.issue_challenge();
    Json(ChallengeResponse {
        challenge_hex: ch.nonce_hex(),
        ttl_ms: ch.ttl_ms,
        issued_at_ms: ch.issued_at_ms,
    })
}

async fn verify(State(svc): State<Arc<VerifierService>>, body: Bytes) -> Response {
    let req: VerifyRequest = match parse(&body) {
        Ok(r) => r,
        Err(resp) => return resp,
    };
    let nonce = match hex::decode(&req.challenge_hex)
        .ok()
        .and_then(|v| <[u8; NONCE_LEN]>::try_from(v).ok())
    {
        Some(n) => n,
        None => {
            return error(
                StatusCode::BAD_REQUEST,
                "challenge_hex: expected 32 bytes of hex",
            )
        }
    };
    let proof = match AuthProof::try_from(req.proof) {
        Ok(p) => p,
        Err(e) => return error(StatusCode::BAD_REQUEST, e),
    };
    let out = svc.verify(&proof, nonce);
    let body = match &out.verdict {
        Ok(a) => VerifyResponse {
            result: "accept".into(),
            reason: None,
            heartbeat_age_epochs: a.age_epochs,
            verified_at_ms: out.now_ms,
        },
        Err(r) => VerifyResponse {
            result: "reject".into(),
            reason: Some(r.reason.to_string()),
            heartbeat_age_epochs: r.age_epochs,
            verified_at_ms: out.now_ms,
        },
    };
    let status = match out.challenge {
        ChallengeStatus::Used => StatusCode::CONFLICT,
        ChallengeStatus::Expired => StatusCode::GONE,
        ChallengeStatus::Usable | ChallengeStatus::Unknown => StatusCode::OK,
    };
    (status, Json(body)).into_response()
}

async fn health(State(svc): State<Arc<VerifierService>>) -> Json<HealthResponse> {
    Json(svc.health())
}

pub fn router(svc: Arc<VerifierService>) -> Router {
    let limit = svc.config().max_in_flight;
    Router::new()
        .route("/parents", post(register))
        .route("/challenge", post(challenge))
        .route("/verify", post(verify))
        .route("/health", get(health))
        .layer(ConcurrencyLimitLayer::new(limit))
        .with_state(svc)
}

/// A server running on a background task.
pub struct RunningServer {
    pub addr: SocketAddr,
    pub service: Arc<VerifierService>,
    shutdown: Option<oneshot::Sender<()>>,
    task: tokio::task::JoinHandle<std::io::Result<()>>,
}

impl RunningServer {
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub async fn stop(mut self) -> Result<(), ServiceError> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        self.task
            .await
            .map_err(|e| ServiceError::Runtime(e.to_string()))??;
        Ok(())
    }
}

pub async fn spawn(service: Arc<VerifierService>) -> Result<RunningServer, ServiceError> {
    service.config().validate()?;
    let listener = tokio::net::TcpListener::bind(service.config().addr()).await?;
    let addr = listener.local_addr()?;
    let (tx, rx) = oneshot::channel();
    let app = router(service.clone());
    let task = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await
    });
    tracing::info!(%addr, "verifier listening");
    Ok(RunningServer {
        addr,
        service,
        shutdown: Some(tx),
        task,
    })
}

/// Serves until the process is stopped.
pub async fn serve(config: ServiceConfig) -> Result<(), ServiceError> {
    config.validate()?;
    let service = Arc::new(VerifierService::new(config));
    let listener = tokio::net::TcpListener::bind(service.config().addr()).await?;
    tracing::info!(addr = %listener.local_addr()?, "verifier listening");
    axum::serve(listener, router(service)).await?;
    Ok(())
}
