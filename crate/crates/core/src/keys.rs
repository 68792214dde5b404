//! Agent key hierarchy and credential issuance.
//!
//! Every agent holds three key components derived from its identity scalar:
//! the identity key pair (signs authentication proofs), a heartbeat key pair
//! (signs heartbeat commitments only) and a child-derivation key that acts as
//! the chain code for its children. Children are addressed by string ids; the
//! child identity scalar is `kdf(cdk_parent, "child:" || id)`.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{self, CryptoError, Digest, PublicPoint, SecretScalar};

pub const MAX_AGENT_ID_LEN: usize = 256;

const LABEL_IDENTITY: &[u8] = b"identity";
const LABEL_HEARTBEAT: &[u8] = b"heartbeat";
const LABEL_CHILDREN: &[u8] = b"children";
const LABEL_CHILD_PREFIX: &[u8] = b"child:";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KeyError {
    #[error("agent id must not be empty")]
    EmptyId,
    #[error("agent id is {0} bytes, limit is {MAX_AGENT_ID_LEN}")]
    IdTooLong(usize),
    #[error("agent id must not contain control characters")]
    IdControlChar,
    #[error("child {0} already has a credential from this parent")]
    DuplicateChild(AgentId),
    #[error("credential field {0} missing")]
    MissingField(&'static str),
    #[error("credential field {field} malformed: {reason}")]
    MalformedField { field: &'static str, reason: String },
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

/// Agent identifier: non-empty UTF-8, at most 256 bytes, no control characters.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct AgentId(String);

impl AgentId {
    pub fn new(id: impl Into<String>) -> Result<Self, KeyError> {
        let id = id.into();
        if id.is_empty() {
            return Err(KeyError::EmptyId);
        }
        if id.len() > MAX_AGENT_ID_LEN {
            return Err(KeyError::IdTooLong(id.len()));
        }
        if id.chars().any(char::is_control) {
            return Err(KeyError::IdControlChar);
        }
        Ok(Self(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn as_bytes(&self) -> &[u8] {
        self.0.as_bytes()
    }
}

impl TryFrom<String> for AgentId {
    type Error = KeyError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<AgentId> for String {
    fn from(id: AgentId) -> Self {
        id.0
    }
}

impl FromStr for AgentId {
    type Err = KeyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AgentId({:?})", self.0)
    }
}

/// An agent's full key material. Immutable after creation.
#[derive(Clone, PartialEq, Eq)]
pub struct AgentIdentity {
    pub agent_id: AgentId,
    pub identity_sk: SecretScalar,
    pub identity_pk: PublicPoint,
    pub heartbeat_sk: SecretScalar,
    pub heartbeat_pk: PublicPoint,
    pub child_derivation_key: [u8; 32],
    /// 0 for the root authority.
    pub level: u32,
}

impl fmt::Debug for AgentIdentity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AgentIdentity")
            .field("agent_id", &self.agent_id)
            .field("identity_pk", &self.identity_pk)
            .field("heartbeat_pk", &self.heartbeat_pk)
            .field("level", &self.level)
            .finish_non_exhaustive()
    }
}

impl AgentIdentity {
    /// Rebuilds the heartbeat and child-derivation components from an identity scalar.
    pub fn from_identity_scalar(
        agent_id: AgentId,
        identity_sk: SecretScalar,
        level: u32,
    ) -> Result<Self, KeyError> {
        let (heartbeat_sk, heartbeat_pk) = derive_heartbeat_keys(&identity_sk)?;
        let child_derivation_key = crypto::kdf(&identity_sk.to_bytes(), LABEL_CHILDREN)?;
        Ok(Self {
            identity_pk: identity_sk.public_point(),
            agent_id,
            identity_sk,
            heartbeat_sk,
            heartbeat_pk,
            child_derivation_key,
            level,
        })
    }
}

/// Creates the root authority (level 0) from a 32-byte seed.
pub fn create_root(agent_id: AgentId, seed: &[u8; 32]) -> Result<AgentIdentity, KeyError> {
    let sk = crypto::scalar_from_bytes(seed, LABEL_IDENTITY)?;
    AgentIdentity::from_identity_scalar(agent_id, sk, 0)
}

pub fn derive_heartbeat_keys(
    identity_sk: &SecretScalar,
) -> Result<(SecretScalar, PublicPoint), KeyError> {
    let candidate = crypto::kdf(&identity_sk.to_bytes(), LABEL_HEARTBEAT)?;
    let hsk = crypto::scalar_from_bytes(&candidate, LABEL_HEARTBEAT)?;
    let hpk = hsk.public_point();
    Ok((hsk, hpk))
}

/// Derives the full identity of `child_id` under `parent`.
pub fn derive_child(parent: &AgentIdentity, child_id: &AgentId) -> Result<AgentIdentity, KeyError> {
    let mut label = Vec::with_capacity(LABEL_CHILD_PREFIX.len() + child_id.as_bytes().len());
    label.extend_from_slice(LABEL_CHILD_PREFIX);
    label.extend_from_slice(child_id.as_bytes());
    let candidate = crypto::kdf(&parent.child_derivation_key, &label)?;
    let sk = crypto::scalar_from_bytes(&candidate, &label)?;
    AgentIdentity::from_identity_scalar(child_id.clone(), sk, parent.level + 1)
}

/// `hash(hpk_parent || child_id)`.
pub fn compute_hb_binding(parent_hpk: &PublicPoint, child_id: &AgentId) -> Digest {
    crypto::hash_parts(&[parent_hpk.as_bytes(), child_id.as_bytes()])
}

/// A child's public key tied to one parent's heartbeat key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Credential {
    pub child_id: AgentId,
    pub child_pk: PublicPoint,
    pub hb_binding: Digest,
    pub parent_id: AgentId,
    pub issued_at_epoch: u64,
}

impl Credential {
    pub fn binding_matches(&self, parent_hpk: &PublicPoint) -> bool {
        compute_hb_binding(parent_hpk, &self.child_id) == self.hb_binding
    }

    /// Line-oriented `key=value` text; binary fields hex-encoded, fixed field order.
    pub fn to_text(&self) -> String {
        format!(
            "child_id={}\nchild_pk={}\nhb_binding={}\nparent_id={}\nissued_at_epoch={}\n",
            self.child_id,
            self.child_pk.to_hex(),
            self.hb_binding.to_hex(),
            self.parent_id,
            self.issued_at_epoch
        )
    }

    pub fn from_text(text: &str) -> Result<Self, KeyError> {
        const FIELDS: [&str; 5] = [
            "child_id",
            "child_pk",
            "hb_binding",
            "parent_id",
            "issued_at_epoch",
        ];
        let mut values: [Option<&str>; 5] = [None; 5];
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (key, value) = line.split_once('=').ok_or(KeyError::MalformedField {
                field: "line",
                reason: format!("no '=' in {line:?}"),
            })?;
            let idx = FIELDS
                .iter()
                .position(|f| *f == key.trim())
                .ok_or_else(|| KeyError::MalformedField {
                    field: "line",
                    reason: format!("unknown key {key:?}"),
                })?;
            values[idx] = Some(value);
        }
        let get = |i: usize| values[i].ok_or(KeyError::MissingField(FIELDS[i]));
        let malformed = |field: &'static str| {
            move |e: CryptoError| KeyError::MalformedField {
                field,
                reason: e.to_string(),
            }
        };
        Ok(Self {
            child_id: AgentId::new(get(0)?)?,
            child_pk: PublicPoint::from_hex(get(1)?).map_err(malformed("child_pk"))?,
            hb_binding: Digest::from_hex(get(2)?).map_err(malformed("hb_binding"))?,
            parent_id: AgentId::new(get(3)?)?,
            issued_at_epoch: get(4)?
                .trim()
                .parse()
                .map_err(|e: std::num::ParseIntError| KeyError::MalformedField {
                    field: "issued_at_epoch",
                    reason: e.to_string(),
                })?,
        })
    }
}

/// Derives the child and issues its credential. Uniqueness of `child_id`
/// under this parent is the caller's responsibility; [`CredentialIssuer`]
/// enforces it.
pub fn issue_credential(
    parent: &AgentIdentity,
    child_id: &AgentId,
    now_epoch: u64,
) -> Result<(Credential, AgentIdentity), KeyError> {
    let child = derive_child(parent, child_id)?;
    let credential = Credential {
        child_id: child_id.clone(),
        child_pk: child.identity_pk,
        hb_binding: compute_hb_binding(&parent.heartbeat_pk, child_id),
        parent_id: parent.agent_id.clone(),
        issued_at_epoch: now_epoch,
    };
    Ok((credential, child))
}

/// Issues credentials on behalf of one parent and refuses duplicate child ids.
#[derive(Debug)]
pub struct CredentialIssuer<'a> {
    parent: &'a AgentIdentity,
    issued: HashSet<AgentId>,
}

impl<'a> CredentialIssuer<'a> {
    pub fn new(parent: &'a AgentIdentity) -> Self {
        Self {
            parent,
            issued: HashSet::new(),
        }
    }

    pub fn issue(
        &mut self,
        child_id: &AgentId,
        now_epoch: u64,
    ) -> Result<(Credential, AgentIdentity), KeyError> {
        if self.issued.contains(child_id) {
            return Err(KeyError::DuplicateChild(child_id.clone()));
        }
        let issued = issue_credential(self.parent, child_id, now_epoch)?;
        self.issued.insert(child_id.clone());
        Ok(issued)
    }

    pub fn issued_count(&self) -> usize {
        self.issued.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(s: &str) -> AgentId {
        AgentId::new(s).unwrap()
    }

    fn root(seed: u8) -> AgentIdentity {
        create_root(id("root"), &[seed; 32]).unwrap()
    }

    #[test]
    fn agent_id_validation() {
        assert_eq!(AgentId::new(""), Err(KeyError::EmptyId));
        assert_eq!(AgentId::new("a".repeat(257)), Err(KeyError::IdTooLong(257)));
        assert!(AgentId::new("a".repeat(256)).is_ok());
        assert_eq!(AgentId::new("a\nb"), Err(KeyError::IdControlChar));
        assert!(serde_json::from_str::<AgentId>("\"\"").is_err());
    }

    #[test]
    fn root_is_deterministic_and_zero_seed_is_valid() {
        assert_eq!(root(1), root(1));
        assert_eq!(root(1).level, 0);
        let zero = create_root(id("root"), &[0u8; 32]).unwrap();
        assert_ne!(zero.identity_sk.to_bytes(), [0u8; 32]);
    }

    #[test]
    fn distinct_seeds_distinct_roots() {
        let mut seen = HashSet::new();
        for i in 0..1000u32 {
            let mut seed = [0u8; 32];
            seed[..4].copy_from_slice(&i.to_be_bytes());
            let r = create_root(id("r"), &seed).unwrap();
            assert!(seen.insert(*r.identity_pk.as_bytes()));
        }
    }

    #[test]
    fn heartbeat_keys_are_separate_from_identity() {
        for i in 0..1000u32 {
            let mut seed = [7u8; 32];
            seed[..4].copy_from_slice(&i.to_be_bytes());
            let r = create_root(id("r"), &seed).unwrap();
            let (hsk, hpk) = derive_heartbeat_keys(&r.identity_sk).unwrap();
            assert_eq!(hsk, r.heartbeat_sk);
            assert_ne!(hsk, r.identity_sk);
            assert_ne!(hpk, r.identity_pk);
            assert_ne!(r.child_derivation_key, r.identity_sk.to_bytes());
        }
    }

    #[test]
    fn child_derivation() {
        let p = root(2);
        let a = derive_child(&p, &id("worker-1")).unwrap();
        assert_eq!(a, derive_child(&p, &id("worker-1")).unwrap());
        let b = derive_child(&p, &id("worker-2")).unwrap();
        assert_ne!(a.identity_pk, b.identity_pk);
        assert_ne!(a.heartbeat_pk, b.heartbeat_pk);
        assert_eq!(a.level, 1);
        let c = derive_child(&a, &id("sub")).unwrap();
        assert_eq!(c.level, 2);
    }

    #[test]
    fn child_holds_no_parent_secret() {
        let p = root(4);
        let c = derive_child(&p, &id("c")).unwrap();
        let parent_secrets = [
            p.identity_sk.to_bytes(),
            p.heartbeat_sk.to_bytes(),
            p.child_derivation_key,
        ];
        let child_material = [
            c.identity_sk.to_bytes(),
            c.heartbeat_sk.to_bytes(),
            c.child_derivation_key,
        ];
        for secret in &parent_secrets {
            assert!(!child_material.contains(secret));
            // nor can any one-step derivation from child material reach them
            for m in &child_material {
                for label in [LABEL_HEARTBEAT, LABEL_CHILDREN, LABEL_IDENTITY] {
                    assert_ne!(&crypto::kdf(m, label).unwrap(), secret);
                }
            }
        }
    }

    #[test]
    fn binding_depends_on_both_inputs() {
        let parents: Vec<_> = (0..100u8).map(root).collect();
        let child = id("c");
        let mut seen = HashSet::new();
        for p in &parents {
            assert!(seen.insert(compute_hb_binding(&p.heartbeat_pk, &child)));
        }
        let p = &parents[0];
        let mut seen = HashSet::new();
        for i in 0..100 {
            assert!(seen.insert(compute_hb_binding(&p.heartbeat_pk, &id(&format!("c{i}")))));
        }
    }

    #[test]
    fn credential_binding_cross_parent_matrix() {
        let parents: Vec<_> = (10..15u8).map(root).collect();
        for (i, p) in parents.iter().enumerate() {
            let (cred, child) = issue_credential(p, &id("child"), 42).unwrap();
            assert_eq!(cred.issued_at_epoch, 42);
            assert_eq!(cred.child_pk, child.identity_pk);
            for (j, q) in parents.iter().enumerate() {
                assert_eq!(cred.binding_matches(&q.heartbeat_pk), i == j);
            }
        }
    }

    #[test]
    fn issuer_rejects_duplicates() {
        let p = root(5);
        let mut issuer = CredentialIssuer::new(&p);
        issuer.issue(&id("a"), 0).unwrap();
        issuer.issue(&id("b"), 0).unwrap();
        assert_eq!(
            issuer.issue(&id("a"), 1).unwrap_err(),
            KeyError::DuplicateChild(id("a"))
        );
        assert_eq!(issuer.issued_count(), 2);
    }

    #[test]
    fn credential_text_roundtrip_and_errors() {
        let p = root(6);
        let (cred, _) = issue_credential(&p, &id("w=1"), 9).unwrap();
        let text = cred.to_text();
        assert!(text.starts_with("child_id=w=1\nchild_pk="));
        assert_eq!(Credential::from_text(&text).unwrap(), cred);

        let missing = text.replace(&format!("parent_id={}\n", p.agent_id), "");
        assert_eq!(
            Credential::from_text(&missing).unwrap_err(),
            KeyError::MissingField("parent_id")
        );
        let bad = text.replace("issued_at_epoch=9", "issued_at_epoch=x");
        assert!(matches!(
            Credential::from_text(&bad),
            Err(KeyError::MalformedField {
                field: "issued_at_epoch",
                ..
            })
        ));
    }
}
