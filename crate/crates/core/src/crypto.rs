//! Hashing, keyed derivation and secp256k1 ECDSA.
//!
//! Everything here is a pure function of its inputs. Signatures use
//! deterministic (RFC 6979) nonces and are always emitted in low-s form;
//! verification rejects high-s encodings. Points and signatures travel as raw
//! fixed-width byte strings: 64-byte `x || y` points, 64-byte `r || s`
//! signatures and 32-byte digests.

use std::fmt;

use hmac::{Hmac, Mac};
use k256::ecdsa::signature::{Signer, Verifier};
use k256::ecdsa::{SigningKey, VerifyingKey};
use k256::elliptic_curve::ops::Reduce;
use k256::{FieldBytes, NonZeroScalar, Scalar, U256};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

pub const DIGEST_LEN: usize = 32;
pub const PUBLIC_POINT_LEN: usize = 64;
pub const SIGNATURE_LEN: usize = 64;

/// Upper bound on rejection-sampling retries in [`scalar_from_bytes`].
const MAX_SCALAR_RETRIES: u8 = 255;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("derivation key must not be empty")]
    EmptyKey,
    #[error("expected {expected} bytes, got {actual}")]
    InvalidLength { expected: usize, actual: usize },
    #[error("bytes do not encode a point on secp256k1")]
    InvalidPoint,
    #[error("invalid hex: {0}")]
    InvalidHex(String),
    #[error("no valid scalar after {0} derivation retries")]
    ScalarDerivationExhausted(u8),
}

/// SHA-256 output.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Digest(pub [u8; DIGEST_LEN]);

impl Digest {
    pub fn as_bytes(&self) -> &[u8; DIGEST_LEN] {
        &self.0
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, CryptoError> {
        fixed::<DIGEST_LEN>(bytes).map(Self)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, CryptoError> {
        Self::from_slice(&decode_hex(s)?)
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

/// A nonzero secp256k1 scalar, kept in signing-key form so the public point
/// is computed once.
#[derive(Clone)]
pub struct SecretScalar {
    key: SigningKey,
}

impl SecretScalar {
    /// Accepts only canonical encodings of a nonzero scalar below the group order.
    pub fn from_canonical_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let raw = fixed::<32>(bytes)?;
        SigningKey::from_bytes(&FieldBytes::from(raw))
            .map(|key| Self { key })
            .map_err(|_| CryptoError::InvalidPoint)
    }

    pub fn to_bytes(&self) -> [u8; 32] {
        self.key.to_bytes().into()
    }

    pub fn public_point(&self) -> PublicPoint {
        PublicPoint::from_verifying_key(*self.key.verifying_key())
    }
}

impl PartialEq for SecretScalar {
    fn eq(&self, other: &Self) -> bool {
        self.to_bytes() == other.to_bytes()
    }
}

impl Eq for SecretScalar {}

impl fmt::Debug for SecretScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SecretScalar(..)")
    }
}

/// Affine curve point, serialized as `x || y` without the SEC1 prefix byte.
#[derive(Clone, Copy)]
pub struct PublicPoint {
    bytes: [u8; PUBLIC_POINT_LEN],
    key: VerifyingKey,
}

impl PublicPoint {
    fn from_verifying_key(key: VerifyingKey) -> Self {
        let encoded = key.to_encoded_point(false);
        let mut bytes = [0u8; PUBLIC_POINT_LEN];
        bytes.copy_from_slice(&encoded.as_bytes()[1..]);
        Self { bytes, key }
    }

    /// Parses 64 raw bytes; rejects anything that is not on the curve.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let raw = fixed::<PUBLIC_POINT_LEN>(bytes)?;
        let mut sec1 = [0u8; PUBLIC_POINT_LEN + 1];
        sec1[0] = 0x04;
        sec1[1..].copy_from_slice(&raw);
        let key = VerifyingKey::from_sec1_bytes(&sec1).map_err(|_| CryptoError::InvalidPoint)?;
        Ok(Self { bytes: raw, key })
    }

    pub fn as_bytes(&self) -> &[u8; PUBLIC_POINT_LEN] {
        &self.bytes
    }

    pub fn x(&self) -> &[u8] {
        &self.bytes[..32]
    }

    pub fn y(&self) -> &[u8] {
        &self.bytes[32..]
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.bytes)
    }

    pub fn from_hex(s: &str) -> Result<Self, CryptoError> {
        Self::from_bytes(&decode_hex(s)?)
    }
}

impl PartialEq for PublicPoint {
    fn eq(&self, other: &Self) -> bool {
        self.bytes == other.bytes
    }
}

impl Eq for PublicPoint {}

impl std::hash::Hash for PublicPoint {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.bytes.hash(state);
    }
}

impl fmt::Debug for PublicPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicPoint({})", self.to_hex())
    }
}

/// Raw `r || s` ECDSA signature. Parsing is deferred to [`verify`] so that a
/// malformed signature is a rejection rather than a decode failure.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Signature(pub [u8; SIGNATURE_LEN]);

impl Signature {
    pub fn from_slice(bytes: &[u8]) -> Result<Self, CryptoError> {
        fixed::<SIGNATURE_LEN>(bytes).map(Self)
    }

    pub fn as_bytes(&self) -> &[u8; SIGNATURE_LEN] {
        &self.0
    }

    pub fn r(&self) -> &[u8] {
        &self.0[..32]
    }

    pub fn s(&self) -> &[u8] {
        &self.0[32..]
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, CryptoError> {
        Self::from_slice(&decode_hex(s)?)
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({})", self.to_hex())
    }
}

pub fn hash(data: &[u8]) -> Digest {
    Digest(Sha256::digest(data).into())
}

/// Hashes the concatenation of `parts` without allocating.
pub fn hash_parts(parts: &[&[u8]]) -> Digest {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update(part);
    }
    Digest(hasher.finalize().into())
}

/// HMAC-SHA256(key, label).
pub fn kdf(key: &[u8], label: &[u8]) -> Result<[u8; 32], CryptoError> {
    if key.is_empty() {
        return Err(CryptoError::EmptyKey);
    }
    let mut mac = Hmac::<Sha256>::new_from_slice(key).map_err(|_| CryptoError::EmptyKey)?;
    mac.update(label);
    Ok(mac.finalize().into_bytes().into())
}

/// Maps 32 bytes onto a valid secret scalar.
///
/// The candidate is reduced modulo the group order; a zero result is
/// re-derived as `kdf(candidate, context || counter)` for counter 1, 2, ...
pub fn scalar_from_bytes(
    candidate: &[u8; 32],
    context: &[u8],
) -> Result<SecretScalar, CryptoError> {
    if let Some(s) = nonzero_reduced(candidate) {
        return Ok(s);
    }
    let mut label = Vec::with_capacity(context.len() + 1);
    for counter in 1..=MAX_SCALAR_RETRIES {
        label.clear();
        label.extend_from_slice(context);
        label.push(counter);
        let retry = kdf(candidate, &label)?;
        if let Some(s) = nonzero_reduced(&retry) {
            return Ok(s);
        }
    }
    Err(CryptoError::ScalarDerivationExhausted(MAX_SCALAR_RETRIES))
}

fn nonzero_reduced(bytes: &[u8; 32]) -> Option<SecretScalar> {
    let scalar = <Scalar as Reduce<U256>>::reduce_bytes(&FieldBytes::from(*bytes));
    Option::<NonZeroScalar>::from(NonZeroScalar::new(scalar)).map(|nz| SecretScalar {
        key: SigningKey::from(nz),
    })
}

pub fn keypair(sk: &SecretScalar) -> PublicPoint {
    sk.public_point()
}

/// ECDSA over SHA-256(message), deterministic nonce, low-s.
pub fn sign(sk: &SecretScalar, message: &[u8]) -> Signature {
    let sig: k256::ecdsa::Signature = sk.key.sign(message);
    let sig = sig.normalize_s().unwrap_or(sig);
    Signature(sig.to_bytes().into())
}

/// Returns `true` iff `sig` is a valid low-s signature on `message` under `pk`.
pub fn verify(pk: &PublicPoint, message: &[u8], sig: &Signature) -> bool {
    let Ok(parsed) = k256::ecdsa::Signature::from_slice(&sig.0) else {
        return false;
    };
    if parsed.normalize_s().is_some() {
        return false;
    }
    pk.key.verify(message, &parsed).is_ok()
}

pub(crate) fn decode_hex(s: &str) -> Result<Vec<u8>, CryptoError> {
    hex::decode(s.trim()).map_err(|e| CryptoError::InvalidHex(e.to_string()))
}

fn fixed<const N: usize>(bytes: &[u8]) -> Result<[u8; N], CryptoError> {
    bytes.try_into().map_err(|_| CryptoError::InvalidLength {
        expected: N,
        actual: bytes.len(),
    })
}

macro_rules! hex_serde {
    ($ty:ty) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.serialize_str(&self.to_hex())
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let s = String::deserialize(deserializer)?;
                <$ty>::from_hex(&s).map_err(serde::de::Error::custom)
            }
        }
    };
}

hex_serde!(Digest);
hex_serde!(PublicPoint);
hex_serde!(Signature);
