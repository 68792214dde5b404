//! Challenges, authentication proofs and offline verification.
//!
//! Verification runs these checks in order and reports the first failure:
//!
//! 1. parent heartbeat key is cached ([`RejectReason::UnknownParent`])
//! 2. parent is not latched as revoked ([`RejectReason::SentinelRevoked`])
//! 3. proof epoch is not the sentinel ([`RejectReason::SentinelRevoked`])
//! 4. freshness: heartbeat age in `0..=max_age + grace` (time mode) or
//!    `s_last < s <= s_last + k` (sequence mode)
//! 5. heartbeat signature over `hash(hpk || epoch)`
//! 6. credential binding equals `hash(hpk || child_id)`
//! 7. child signature over `nonce || epoch || heartbeat_sig`
//! 8. challenge unused and unexpired
//!
//! Nothing here touches the network. The only inputs are the proof, the
//! verifier's cached state, the challenge and the caller-supplied local time.

use std::collections::{HashMap, HashSet};
use std::fmt;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::crypto::{self, PublicPoint, SecretScalar, Signature};
use crate::heartbeat::{self, FreshnessMode, Heartbeat, SENTINEL_EPOCH};
use crate::keys::{AgentId, Credential};

pub const DEFAULT_CHALLENGE_TTL_MS: u64 = 30_000;
pub const NONCE_LEN: usize = 32;
pub const PROOF_DATA_LEN: usize = NONCE_LEN + 8 + crypto::SIGNATURE_LEN;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FreshnessPolicy {
    /// Heartbeat interval in milliseconds.
    pub interval_ms: u64,
    /// Maximum accepted heartbeat age in epochs (`W_max / interval`).
    pub max_age_epochs: u64,
    #[serde(default)]
    pub grace_epochs: u64,
    #[serde(default)]
    pub mode: FreshnessMode,
    /// Largest accepted jump over the last accepted sequence number.
    #[serde(default = "default_gap")]
    pub max_sequence_gap: u64,
}

fn default_gap() -> u64 {
    3
}

impl FreshnessPolicy {
    pub fn time_epoch(interval_ms: u64, max_age_epochs: u64) -> Self {
        Self {
            interval_ms,
            max_age_epochs,
            grace_epochs: 0,
            mode: FreshnessMode::TimeEpoch,
            max_sequence_gap: default_gap(),
        }
    }

    pub fn sequence(interval_ms: u64, max_sequence_gap: u64) -> Self {
        Self {
            interval_ms,
            max_age_epochs: max_sequence_gap,
            grace_epochs: 0,
            mode: FreshnessMode::Sequence,
            max_sequence_gap,
        }
    }

    pub fn with_grace(mut self, grace_epochs: u64) -> Self {
        self.grace_epochs = grace_epochs;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.interval_ms == 0 {
            return Err("interval_ms must be positive".into());
        }
        if self.mode == FreshnessMode::Sequence && self.max_sequence_gap == 0 {
            return Err("max_sequence_gap must be positive in sequence mode".into());
        }
        Ok(())
    }

    pub fn w_max_ms(&self) -> u64 {
        self.max_age_epochs * self.interval_ms
    }

    pub fn current_epoch(&self, now_ms: u64) -> u64 {
        now_ms / self.interval_ms
    }

    /// Worst-case zombie window for a verifier lagging by `lag_ms`:
    /// `W_max + g * interval + interval + lag`.
    pub fn zombie_bound_ms(&self, lag_ms: u64) -> u64 {
        (self.max_age_epochs + self.grace_epochs + 1) * self.interval_ms + lag_ms
    }
}

/// Single-use random nonce issued by a verifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Challenge {
    pub nonce: [u8; NONCE_LEN],
    pub issued_at_ms: u64,
    pub ttl_ms: u64,
    pub used: bool,
}

pub fn issue_challenge(now_ms: u64, rng: &mut impl RngCore) -> Challenge {
    Challenge::issue(now_ms, DEFAULT_CHALLENGE_TTL_MS, rng)
}

impl Challenge {
    pub fn issue(now_ms: u64, ttl_ms: u64, rng: &mut impl RngCore) -> Self {
        let mut nonce = [0u8; NONCE_LEN];
        rng.fill_bytes(&mut nonce);
        Self::from_nonce(nonce, now_ms, ttl_ms)
    }

    pub fn from_nonce(nonce: [u8; NONCE_LEN], issued_at_ms: u64, ttl_ms: u64) -> Self {
        Self {
            nonce,
            issued_at_ms,
            ttl_ms,
            used: false,
        }
    }

    /// A placeholder for a nonce the verifier never issued. It never passes check 8.
    pub fn unknown(nonce: [u8; NONCE_LEN]) -> Self {
        Self {
            nonce,
            issued_at_ms: 0,
            ttl_ms: 0,
            used: true,
        }
    }

    pub fn is_expired_at(&self, now_ms: u64) -> bool {
        now_ms.saturating_sub(self.issued_at_ms) > self.ttl_ms
    }

    pub fn is_usable_at(&self, now_ms: u64) -> bool {
        !self.used && !self.is_expired_at(now_ms)
    }

    pub fn nonce_hex(&self) -> String {
        hex::encode(self.nonce)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "ProofWire", try_from = "ProofWire")]
pub struct AuthProof {
    pub credential: Credential,
    pub epoch: u64,
    pub heartbeat_sig: Signature,
    pub child_sig: Signature,
}

/// Flat JSON form of a proof, shared by the CLI and the HTTP service.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofWire {
    pub child_id: String,
    pub child_pk_hex: String,
    pub hb_binding_hex: String,
    pub parent_id: String,
    pub issued_at_epoch: u64,
    pub epoch: u64,
    pub heartbeat_sig_hex: String,
    pub child_sig_hex: String,
}

impl From<AuthProof> for ProofWire {
    fn from(p: AuthProof) -> Self {
        Self {
            child_id: p.credential.child_id.to_string(),
            child_pk_hex: p.credential.child_pk.to_hex(),
            hb_binding_hex: p.credential.hb_binding.to_hex(),
            parent_id: p.credential.parent_id.to_string(),
            issued_at_epoch: p.credential.issued_at_epoch,
            epoch: p.epoch,
            heartbeat_sig_hex: p.heartbeat_sig.to_hex(),
            child_sig_hex: p.child_sig.to_hex(),
        }
    }
}

impl TryFrom<ProofWire> for AuthProof {
    type Error = String;

    fn try_from(w: ProofWire) -> Result<Self, Self::Error> {
        fn field(name: &'static str) -> impl Fn(crypto::CryptoError) -> String {
            move |e| format!("{name}: {e}")
        }
        Ok(Self {
            credential: Credential {
                child_id: AgentId::new(w.child_id).map_err(|e| format!("child_id: {e}"))?,
                child_pk: PublicPoint::from_hex(&w.child_pk_hex).map_err(field("child_pk_hex"))?,
                hb_binding: crypto::Digest::from_hex(&w.hb_binding_hex)
                    .map_err(field("hb_binding_hex"))?,
                parent_id: AgentId::new(w.parent_id).map_err(|e| format!("parent_id: {e}"))?,
                issued_at_epoch: w.issued_at_epoch,
            },
            epoch: w.epoch,
            heartbeat_sig: Signature::from_hex(&w.heartbeat_sig_hex)
                .map_err(field("heartbeat_sig_hex"))?,
            child_sig: Signature::from_hex(&w.child_sig_hex).map_err(field("child_sig_hex"))?,
        })
    }
}

/// `nonce || epoch_be8 || heartbeat_sig`.
pub fn proof_data(
    nonce: &[u8; NONCE_LEN],
    epoch: u64,
    heartbeat_sig: &Signature,
) -> [u8; PROOF_DATA_LEN] {
    let mut data = [0u8; PROOF_DATA_LEN];
    data[..NONCE_LEN].copy_from_slice(nonce);
    data[NONCE_LEN..NONCE_LEN + 8].copy_from_slice(&epoch.to_be_bytes());
    data[NONCE_LEN + 8..].copy_from_slice(heartbeat_sig.as_bytes());
    data
}

pub fn create_auth_proof(
    child_sk: &SecretScalar,
    credential: &Credential,
    heartbeat: &Heartbeat,
    challenge_nonce: &[u8; NONCE_LEN],
) -> AuthProof {
    let data = proof_data(challenge_nonce, heartbeat.epoch, &heartbeat.sig);
    AuthProof {
        credential: credential.clone(),
        epoch: heartbeat.epoch,
        heartbeat_sig: heartbeat.sig,
        child_sig: crypto::sign(child_sk, &data),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RejectReason {
    UnknownParent,
    SentinelRevoked,
    HeartbeatExpired,
    FutureHeartbeat,
    SequenceRegression,
    SequenceGapExceeded,
    InvalidHeartbeatSig,
    BindingMismatch,
    InvalidChildSig,
    ChallengeInvalid,
    /// Proof epoch below a token's `hb_epoch_min` claim.
    BelowMinimumEpoch,
}

impl RejectReason {
    pub const ALL: [RejectReason; 11] = [
        Self::UnknownParent,
        Self::SentinelRevoked,
        Self::HeartbeatExpired,
        Self::FutureHeartbeat,
        Self::SequenceRegression,
        Self::SequenceGapExceeded,
        Self::InvalidHeartbeatSig,
        Self::BindingMismatch,
        Self::InvalidChildSig,
        Self::ChallengeInvalid,
        Self::BelowMinimumEpoch,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::UnknownParent => "UnknownParent",
            Self::SentinelRevoked => "SentinelRevoked",
            Self::HeartbeatExpired => "HeartbeatExpired",
            Self::FutureHeartbeat => "FutureHeartbeat",
            Self::SequenceRegression => "SequenceRegression",
            Self::SequenceGapExceeded => "SequenceGapExceeded",
            Self::InvalidHeartbeatSig => "InvalidHeartbeatSig",
            Self::BindingMismatch => "BindingMismatch",
            Self::InvalidChildSig => "InvalidChildSig",
            Self::ChallengeInvalid => "ChallengeInvalid",
            Self::BelowMinimumEpoch => "BelowMinimumEpoch",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for RejectReason {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown reject reason {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Accepted {
    pub parent_id: AgentId,
    pub child_id: AgentId,
    /// Heartbeat age in epochs (time mode only).
    pub age_epochs: Option<i64>,
    /// Sequence number to commit as the new `s_last` (sequence mode only).
    pub sequence: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub reason: RejectReason,
    pub age_epochs: Option<i64>,
    /// Set when the proof carried a correctly signed sentinel; the verifier
    /// should latch the parent as revoked.
    pub latch_sentinel: Option<AgentId>,
}

impl Rejection {
    pub fn plain(reason: RejectReason, age_epochs: Option<i64>) -> Self {
        Self {
            reason,
            age_epochs,
            latch_sentinel: None,
        }
    }
}

pub type Verdict = Result<Accepted, Rejection>;

/// Read access to verifier state. Implemented by [`VerifierState`] and by
/// any concurrent store that wants to reuse [`evaluate`].
pub trait VerifierView {
    fn parent_key(&self, parent_id: &AgentId) -> Option<PublicPoint>;
    fn is_sentinel_revoked(&self, parent_id: &AgentId) -> bool;
    fn last_sequence(&self, child_id: &AgentId) -> Option<u64>;
}

/// Freshness rule alone (check 4). Returns the heartbeat age in epochs in
/// time mode.
pub fn check_freshness(
    epoch: u64,
    last_sequence: Option<u64>,
    now_ms: u64,
    policy: &FreshnessPolicy,
) -> Result<Option<i64>, RejectReason> {
    match policy.mode {
        FreshnessMode::TimeEpoch => {
            let current = policy.current_epoch(now_ms);
            let age = i128::from(current) - i128::from(epoch);
            let age_i64 = age.clamp(i128::from(i64::MIN), i128::from(i64::MAX)) as i64;
            if age < 0 {
                Err(RejectReason::FutureHeartbeat)
            } else if age > i128::from(policy.max_age_epochs) + i128::from(policy.grace_epochs) {
                Err(RejectReason::HeartbeatExpired)
            } else {
                Ok(Some(age_i64))
            }
        }
        FreshnessMode::Sequence => {
            let last = last_sequence.unwrap_or(0);
            if epoch <= last {
                Err(RejectReason::SequenceRegression)
            } else if epoch - last > policy.max_sequence_gap {
                Err(RejectReason::SequenceGapExceeded)
            } else {
                Ok(None)
            }
        }
    }
}

fn time_age(epoch: u64, now_ms: u64, policy: &FreshnessPolicy) -> Option<i64> {
    if policy.mode != FreshnessMode::TimeEpoch || epoch == SENTINEL_EPOCH {
        return None;
    }
    let age = i128::from(policy.current_epoch(now_ms)) - i128::from(epoch);
    Some(age.clamp(i128::from(i64::MIN), i128::from(i64::MAX)) as i64)
}

/// Checks 1-4. Cheap: at most one signature verification, and only when a
/// sentinel epoch is presented.
pub fn precheck(
    proof_epoch: u64,
    heartbeat_sig: &Signature,
    parent_id: &AgentId,
    child_id: &AgentId,
    view: &impl VerifierView,
    now_ms: u64,
    policy: &FreshnessPolicy,
) -> Result<(PublicPoint, Option<i64>), Rejection> {
    let Some(hpk) = view.parent_key(parent_id) else {
        return Err(Rejection::plain(RejectReason::UnknownParent, None));
    };
    if view.is_sentinel_revoked(parent_id) {
        return Err(Rejection::plain(RejectReason::SentinelRevoked, None));
    }
    if proof_epoch == SENTINEL_EPOCH {
        // Only a correctly signed sentinel may latch the parent; anyone can
        // put u64::MAX in a proof.
        let genuine = crypto::verify(
            &hpk,
            heartbeat::commitment(&hpk, SENTINEL_EPOCH).as_bytes(),
            heartbeat_sig,
        );
        return Err(Rejection {
            reason: RejectReason::SentinelRevoked,
            age_epochs: None,
            latch_sentinel: genuine.then(|| parent_id.clone()),
        });
    }
    let age = check_freshness(proof_epoch, view.last_sequence(child_id), now_ms, policy)
        .map_err(|reason| Rejection::plain(reason, time_age(proof_epoch, now_ms, policy)))?;
    Ok((hpk, age))
}

/// Checks 1-8 without mutating anything.
pub fn evaluate(
    proof: &AuthProof,
    view: &impl VerifierView,
    challenge: &Challenge,
    now_ms: u64,
    policy: &FreshnessPolicy,
) -> Verdict {
    let cred = &proof.credential;
    let (hpk, age) = precheck(
        proof.epoch,
        &proof.heartbeat_sig,
        &cred.parent_id,
        &cred.child_id,
        view,
        now_ms,
        policy,
    )?;
    let commitment = heartbeat::commitment(&hpk, proof.epoch);
    if !crypto::verify(&hpk, commitment.as_bytes(), &proof.heartbeat_sig) {
        return Err(Rejection::plain(RejectReason::InvalidHeartbeatSig, age));
    }
    if !cred.binding_matches(&hpk) {
        return Err(Rejection::plain(RejectReason::BindingMismatch, age));
    }
    let data = proof_data(&challenge.nonce, proof.epoch, &proof.heartbeat_sig);
    if !crypto::verify(&cred.child_pk, &data, &proof.child_sig) {
        return Err(Rejection::plain(RejectReason::InvalidChildSig, age));
    }
    if !challenge.is_usable_at(now_ms) {
        return Err(Rejection::plain(RejectReason::ChallengeInvalid, age));
    }
    Ok(Accepted {
        parent_id: cred.parent_id.clone(),
        child_id: cred.child_id.clone(),
        age_epochs: age,
        sequence: (policy.mode == FreshnessMode::Sequence).then_some(proof.epoch),
    })
}

/// Everything a verifier keeps between proofs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VerifierState {
    pub cached_parent_keys: HashMap<AgentId, PublicPoint>,
    /// Last accepted sequence number per child.
    pub last_sequence: HashMap<AgentId, u64>,
    pub sentinel_revoked: HashSet<AgentId>,
}

impl VerifierView for VerifierState {
    fn parent_key(&self, parent_id: &AgentId) -> Option<PublicPoint> {
        self.cached_parent_keys.get(parent_id).copied()
    }

    fn is_sentinel_revoked(&self, parent_id: &AgentId) -> bool {
        self.sentinel_revoked.contains(parent_id)
    }

    fn last_sequence(&self, child_id: &AgentId) -> Option<u64> {
        self.last_sequence.get(child_id).copied()
    }
}

impl VerifierState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Trust establishment: remember a parent's heartbeat key.
    pub fn cache_parent_key(&mut self, parent_id: AgentId, hpk: PublicPoint) {
        self.cached_parent_keys.insert(parent_id, hpk);
    }

    pub fn set_sequence_floor(&mut self, child_id: AgentId, last: u64) {
        self.last_sequence.insert(child_id, last);
    }

    /// Feeds a broadcast heartbeat to the verifier. A correctly signed
    /// sentinel from a cached parent latches that parent as revoked.
    pub fn observe_heartbeat(&mut self, parent_id: &AgentId, hb: &Heartbeat) -> bool {
        let Some(hpk) = self.cached_parent_keys.get(parent_id) else {
            return false;
        };
        if hb.is_sentinel() && hb.hpk == *hpk && hb.check().is_ok() {
            self.sentinel_revoked.insert(parent_id.clone());
            return true;
        }
        false
    }

    /// Applies the side effects of a verdict: sentinel latching on rejection,
    /// `s_last` on acceptance.
    pub fn commit(&mut self, verdict: &Verdict) {
        match verdict {
            Ok(accepted) => {
                if let Some(seq) = accepted.sequence {
                    self.last_sequence.insert(accepted.child_id.clone(), seq);
                }
            }
            Err(rejection) => {
                if let Some(parent) = &rejection.latch_sentinel {
                    self.sentinel_revoked.insert(parent.clone());
                }
            }
        }
    }
}

/// Full verification: [`evaluate`] followed by the state updates. The
/// challenge is consumed only on acceptance.
pub fn verify_auth(
    proof: &AuthProof,
    state: &mut VerifierState,
    challenge: &mut Challenge,
    now_ms: u64,
    policy: &FreshnessPolicy,
) -> Verdict {
    let verdict = evaluate(proof, state, challenge, now_ms, policy);
    state.commit(&verdict);
    if verdict.is_ok() {
        challenge.used = true;
    }
    verdict
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AgentLifecycleState {
    Active,
    Zombie,
    Terminated,
}

impl fmt::Display for AgentLifecycleState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Active => "Active",
            Self::Zombie => "Zombie",
            Self::Terminated => "Terminated",
        })
    }
}

/// Lifecycle classification from the newest held heartbeat epoch.
///
/// `Active`: fresh heartbeat, parent not revoked. `Zombie`: parent revoked
/// but the held heartbeat still passes the time-epoch freshness rule.
/// `Terminated`: anything else, including never having held a heartbeat.
pub fn classify_state(
    last_heartbeat_epoch: Option<u64>,
    parent_revoked_at_ms: Option<u64>,
    now_ms: u64,
    policy: &FreshnessPolicy,
) -> AgentLifecycleState {
    let time_policy = FreshnessPolicy {
        mode: FreshnessMode::TimeEpoch,
        ..*policy
    };
    let fresh = last_heartbeat_epoch
        .filter(|e| *e != SENTINEL_EPOCH)
        .is_some_and(|e| check_freshness(e, None, now_ms, &time_policy).is_ok());
    let revoked = parent_revoked_at_ms.is_some_and(|t| t <= now_ms);
    match (fresh, revoked) {
        (true, false) => AgentLifecycleState::Active,
        (true, true) => AgentLifecycleState::Zombie,
        (false, _) => AgentLifecycleState::Terminated,
    }
}

/// Per-agent view of its parent's liveness, updated only by heartbeats that
/// verify under the parent's heartbeat key.
#[derive(Debug, Clone)]
pub struct LifecycleTracker {
    parent_hpk: PublicPoint,
    policy: FreshnessPolicy,
    last_epoch: Option<u64>,
    revoked_at_ms: Option<u64>,
}

impl LifecycleTracker {
    pub fn new(parent_hpk: PublicPoint, policy: FreshnessPolicy) -> Self {
        Self {
            parent_hpk,
            policy,
            last_epoch: None,
            revoked_at_ms: None,
        }
    }

    /// Returns `true` if the heartbeat was accepted as newer liveness evidence.
    /// Heartbeats from the future are ignored; otherwise the mere passage of
    /// time could turn a terminated agent active again.
    pub fn observe(&mut self, hb: &Heartbeat, now_ms: u64) -> bool {
        if hb.hpk != self.parent_hpk || hb.check().is_err() {
            return false;
        }
        if hb.is_sentinel() {
            self.revoked_at_ms.get_or_insert(now_ms);
            return false;
        }
        if hb.epoch > self.policy.current_epoch(now_ms)
            || self.last_epoch.is_some_and(|e| e >= hb.epoch)
        {
            return false;
        }
        self.last_epoch = Some(hb.epoch);
        true
    }

    pub fn mark_revoked(&mut self, at_ms: u64) {
        self.revoked_at_ms.get_or_insert(at_ms);
    }

    pub fn last_epoch(&self) -> Option<u64> {
        self.last_epoch
    }

    pub fn state(&self, now_ms: u64) -> AgentLifecycleState {
        classify_state(self.last_epoch, self.revoked_at_ms, now_ms, &self.policy)
    }
}
