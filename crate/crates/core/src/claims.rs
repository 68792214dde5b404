//! Bridge between credentials and bearer-token claim maps.
//!
//! A token carries the heartbeat binding, the parent's heartbeat key and a
//! minimum acceptable epoch. Token signature validation is the caller's job;
//! [`verify_with_claims`] runs the heartbeat check on top of it.

use serde_json::{Map, Value};
use thiserror::Error;

use crate::crypto::{Digest, PublicPoint};
use crate::keys::{AgentId, Credential};
use crate::verify::{
    self, AuthProof, Challenge, FreshnessPolicy, RejectReason, Rejection, Verdict, VerifierState,
};

pub const CLAIM_HB_BINDING: &str = "hb_binding";
pub const CLAIM_HPK_PARENT: &str = "hpk_parent";
pub const CLAIM_HB_EPOCH_MIN: &str = "hb_epoch_min";
pub const CLAIM_SUB: &str = "sub";
pub const CLAIM_ISS: &str = "iss";
pub const CLAIM_CHILD_PK: &str = "child_pk";
pub const CLAIM_IAT_EPOCH: &str = "iat_epoch";

pub type ClaimMap = Map<String, Value>;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClaimError {
    #[error("missing claim {0:?}")]
    Missing(&'static str),
    #[error("malformed claim {claim:?}: {reason}")]
    Malformed { claim: &'static str, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeartbeatClaims {
    pub credential: Credential,
    pub parent_hpk: PublicPoint,
    pub min_epoch: u64,
}

pub fn embed_claims(credential: &Credential, parent_hpk: &PublicPoint, min_epoch: u64) -> ClaimMap {
    let mut map = Map::new();
    map.insert(
        CLAIM_SUB.into(),
        Value::String(credential.child_id.to_string()),
    );
    map.insert(
        CLAIM_ISS.into(),
        Value::String(credential.parent_id.to_string()),
    );
    map.insert(
        CLAIM_CHILD_PK.into(),
        Value::String(credential.child_pk.to_hex()),
    );
    map.insert(
        CLAIM_IAT_EPOCH.into(),
        Value::from(credential.issued_at_epoch),
    );
    map.insert(
        CLAIM_HB_BINDING.into(),
        Value::String(credential.hb_binding.to_hex()),
    );
    map.insert(CLAIM_HPK_PARENT.into(), Value::String(parent_hpk.to_hex()));
    // hex like the other heartbeat claims; u64 does not survive JSON number precision
    map.insert(
        CLAIM_HB_EPOCH_MIN.into(),
        Value::String(hex::encode(min_epoch.to_be_bytes())),
    );
    map
}

fn string_claim<'a>(map: &'a ClaimMap, claim: &'static str) -> Result<&'a str, ClaimError> {
    match map.get(claim) {
        None => Err(ClaimError::Missing(claim)),
        Some(Value::String(s)) => Ok(s),
        Some(other) => Err(ClaimError::Malformed {
            claim,
            reason: format!("expected string, got {other}"),
        }),
    }
}

fn malformed(claim: &'static str) -> impl Fn(String) -> ClaimError {
    move |reason| ClaimError::Malformed { claim, reason }
}

pub fn extract_claims(map: &ClaimMap) -> Result<HeartbeatClaims, ClaimError> {
    let child_id = AgentId::new(string_claim(map, CLAIM_SUB)?)
        .map_err(|e| malformed(CLAIM_SUB)(e.to_string()))?;
    let parent_id = AgentId::new(string_claim(map, CLAIM_ISS)?)
        .map_err(|e| malformed(CLAIM_ISS)(e.to_string()))?;
    let child_pk = PublicPoint::from_hex(string_claim(map, CLAIM_CHILD_PK)?)
        .map_err(|e| malformed(CLAIM_CHILD_PK)(e.to_string()))?;
    let issued_at_epoch = match map.get(CLAIM_IAT_EPOCH) {
        None => return Err(ClaimError::Missing(CLAIM_IAT_EPOCH)),
        Some(v) => v
            .as_u64()
            .ok_or_else(|| malformed(CLAIM_IAT_EPOCH)(format!("not an unsigned integer: {v}")))?,
    };
    let hb_binding = Digest::from_hex(string_claim(map, CLAIM_HB_BINDING)?)
        .map_err(|e| malformed(CLAIM_HB_BINDING)(e.to_string()))?;
    let parent_hpk = PublicPoint::from_hex(string_claim(map, CLAIM_HPK_PARENT)?)
        .map_err(|e| malformed(CLAIM_HPK_PARENT)(e.to_string()))?;
    let raw = hex::decode(string_claim(map, CLAIM_HB_EPOCH_MIN)?)
        .map_err(|e| malformed(CLAIM_HB_EPOCH_MIN)(e.to_string()))?;
    let bytes: [u8; 8] = raw.try_into().map_err(|v: Vec<u8>| {
        malformed(CLAIM_HB_EPOCH_MIN)(format!("expected 8 bytes, got {}", v.len()))
    })?;
    Ok(HeartbeatClaims {
        credential: Credential {
            child_id,
            child_pk,
            hb_binding,
            parent_id,
            issued_at_epoch,
        },
        parent_hpk,
        min_epoch: u64::from_be_bytes(bytes),
    })
}

/// Heartbeat verification for a token whose signature the caller has already
/// validated. The proof must carry the token's credential and an epoch of at
/// least `hb_epoch_min`.
pub fn verify_with_claims(
    claims: &HeartbeatClaims,
    proof: &AuthProof,
    state: &mut VerifierState,
    challenge: &mut Challenge,
    now_ms: u64,
    policy: &FreshnessPolicy,
) -> Verdict {
    if proof.credential != claims.credential {
        return Err(Rejection {
            reason: RejectReason::BindingMismatch,
            age_epochs: None,
            latch_sentinel: None,
        });
    }
    let verdict = verify::verify_auth(proof, state, challenge, now_ms, policy)?;
    if proof.epoch < claims.min_epoch {
        // verify_auth already consumed the challenge; that is fine, the token is
        // useless with this heartbeat anyway
        return Err(Rejection {
            reason: RejectReason::BelowMinimumEpoch,
            age_epochs: verdict.age_epochs,
            latch_sentinel: None,
        });
    }
    Ok(verdict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heartbeat::{heartbeat_gen, FreshnessMode, HeartbeatConfig};
    use crate::keys::{create_root, issue_credential};
    use crate::verify::{create_auth_proof, issue_challenge};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (
        HeartbeatClaims,
        crate::keys::AgentIdentity,
        crate::keys::AgentIdentity,
    ) {
        let parent = create_root(AgentId::new("p").unwrap(), &[3u8; 32]).unwrap();
        let (cred, child) = issue_credential(&parent, &AgentId::new("c").unwrap(), 7).unwrap();
        let map = embed_claims(&cred, &parent.heartbeat_pk, 12);
        (extract_claims(&map).unwrap(), parent, child)
    }

    #[test]
    fn roundtrip() {
        let (claims, parent, _) = setup();
        let map = embed_claims(&claims.credential, &parent.heartbeat_pk, u64::MAX - 1);
        for key in [CLAIM_HB_BINDING, CLAIM_HPK_PARENT, CLAIM_HB_EPOCH_MIN] {
            assert!(map[key].is_string(), "{key}");
        }
        let back = extract_claims(&map).unwrap();
        assert_eq!(back.credential, claims.credential);
        assert_eq!(back.parent_hpk, parent.heartbeat_pk);
        assert_eq!(back.min_epoch, u64::MAX - 1);
    }

    #[test]
    fn missing_and_malformed() {
        let (claims, parent, _) = setup();
        let mut map = embed_claims(&claims.credential, &parent.heartbeat_pk, 1);
        map.remove(CLAIM_HPK_PARENT);
        assert_eq!(
            extract_claims(&map),
            Err(ClaimError::Missing(CLAIM_HPK_PARENT))
        );

        let mut map = embed_claims(&claims.credential, &parent.heartbeat_pk, 1);
        map.insert(CLAIM_HB_BINDING.into(), Value::String("zz".into()));
        assert!(matches!(
            extract_claims(&map),
            Err(ClaimError::Malformed {
                claim: CLAIM_HB_BINDING,
                ..
            })
        ));

        let mut map = embed_claims(&claims.credential, &parent.heartbeat_pk, 1);
        map.insert(CLAIM_HB_EPOCH_MIN.into(), Value::from(5));
        assert!(matches!(
            extract_claims(&map),
            Err(ClaimError::Malformed {
                claim: CLAIM_HB_EPOCH_MIN,
                ..
            })
        ));
    }

    #[test]
    fn min_epoch_enforced() {
        let (claims, parent, child) = setup();
        let policy = FreshnessPolicy::time_epoch(1_000, 3);
        let cfg = HeartbeatConfig::new(1_000, FreshnessMode::TimeEpoch).unwrap();
        let mut state = VerifierState::new();
        state.cache_parent_key(parent.agent_id.clone(), claims.parent_hpk);
        let mut rng = ChaCha8Rng::seed_from_u64(0);

        let hb = heartbeat_gen(&parent, 11_500, &cfg).unwrap();
        let mut ch = issue_challenge(11_500, &mut rng);
        let proof = create_auth_proof(&child.identity_sk, &claims.credential, &hb, &ch.nonce);
        let rej =
            verify_with_claims(&claims, &proof, &mut state, &mut ch, 11_500, &policy).unwrap_err();
        assert_eq!(rej.reason, RejectReason::BelowMinimumEpoch);

        let hb = heartbeat_gen(&parent, 12_000, &cfg).unwrap();
        let mut ch = issue_challenge(12_000, &mut rng);
        let proof = create_auth_proof(&child.identity_sk, &claims.credential, &hb, &ch.nonce);
        assert!(verify_with_claims(&claims, &proof, &mut state, &mut ch, 12_000, &policy).is_ok());
    }
}
