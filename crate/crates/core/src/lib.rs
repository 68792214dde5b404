//! Heartbeat-bound hierarchical credentials.
//!
//! A child agent's credential is only usable together with a recent, signed
//! heartbeat from its parent. Verifiers decide freshness from a cached parent
//! heartbeat key and their local clock, so when a parent stops producing
//! heartbeats every descendant loses the ability to authenticate within a
//! bounded window, with no revocation message having to reach anyone.
//!
//! Layout:
//! - [`crypto`]: hashing, keyed derivation and secp256k1 ECDSA.
//! - [`keys`]: agent identities, child derivation and credential issuance.
//! - [`heartbeat`]: heartbeat generation, pre-computation and the 168-byte frame.
//! - [`verify`]: challenges, proofs, verification and the lifecycle state machine.
//! - [`claims`]: token claim embedding for bearer-token deployments.

pub mod claims;
pub mod crypto;
pub mod heartbeat;
pub mod keys;
pub mod verify;

pub use crypto::{CryptoError, Digest, PublicPoint, SecretScalar, Signature};
pub use heartbeat::{
    FreshnessMode, Heartbeat, HeartbeatConfig, HeartbeatError, PrecomputeBuffer, SENTINEL_EPOCH,
};
pub use keys::{AgentId, AgentIdentity, Credential, CredentialIssuer, KeyError};
pub use verify::{
    AgentLifecycleState, AuthProof, Challenge, FreshnessPolicy, RejectReason, VerifierState,
};
