//! Heartbeat generation and the 168-byte wire frame.
//!
//! A heartbeat commits to `hash(hpk || epoch_be8)` and signs the commitment
//! with the parent's heartbeat key. The epoch field carries a time epoch
//! (`floor(now_ms / interval_ms)`), a sequence number, or the revocation
//! sentinel `u64::MAX`.
//!
//! Frame layout: `commitment(32) || sig(64) || epoch(8, BE) || hpk(64)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{self, CryptoError, Digest, PublicPoint, Signature, DIGEST_LEN, SIGNATURE_LEN};
use crate::keys::AgentIdentity;

pub const SENTINEL_EPOCH: u64 = u64::MAX;
pub const FRAME_LEN: usize = DIGEST_LEN + SIGNATURE_LEN + 8 + crypto::PUBLIC_POINT_LEN;
/// Default pre-computation horizon, in epochs.
pub const DEFAULT_PRECOMPUTE_CAP: u64 = 3;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HeartbeatError {
    #[error("heartbeat frame must be {FRAME_LEN} bytes, got {0}")]
    WrongLength(usize),
    #[error("heartbeat public key is not a curve point")]
    InvalidPoint,
    #[error("commitment does not match hash(hpk || epoch)")]
    CommitmentMismatch,
    #[error("heartbeat signature does not verify")]
    BadSignature,
    #[error("sequence number collides with the revocation sentinel")]
    SentinelSequence,
    #[error("operation requires {0:?} mode")]
    WrongMode(FreshnessMode),
    #[error("heartbeat interval must be positive")]
    ZeroInterval,
    #[error("pre-computation of {requested} epochs exceeds horizon cap {cap}")]
    HorizonExceeded { requested: u64, cap: u64 },
    #[error("pre-computation needs at least one epoch")]
    EmptyHorizon,
    #[error("epoch range overflows into the sentinel")]
    EpochOverflow,
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreshnessMode {
    #[default]
    TimeEpoch,
    Sequence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeartbeatConfig {
    pub interval_ms: u64,
    pub mode: FreshnessMode,
}

impl HeartbeatConfig {
    pub fn new(interval_ms: u64, mode: FreshnessMode) -> Result<Self, HeartbeatError> {
        if interval_ms == 0 {
            return Err(HeartbeatError::ZeroInterval);
        }
        Ok(Self { interval_ms, mode })
    }

    pub fn epoch_at(&self, now_ms: u64) -> u64 {
        now_ms / self.interval_ms
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Heartbeat {
    pub epoch: u64,
    pub commitment: Digest,
    pub sig: Signature,
    pub hpk: PublicPoint,
}

/// `hash(hpk || epoch_be8)`.
pub fn commitment(hpk: &PublicPoint, epoch: u64) -> Digest {
    crypto::hash_parts(&[hpk.as_bytes(), &epoch.to_be_bytes()])
}

fn signed(parent: &AgentIdentity, epoch: u64) -> Heartbeat {
    let commitment = commitment(&parent.heartbeat_pk, epoch);
    Heartbeat {
        epoch,
        sig: crypto::sign(&parent.heartbeat_sk, commitment.as_bytes()),
        commitment,
        hpk: parent.heartbeat_pk,
    }
}

/// Time-epoch heartbeat for `now_ms`.
pub fn heartbeat_gen(
    parent: &AgentIdentity,
    now_ms: u64,
    config: &HeartbeatConfig,
) -> Result<Heartbeat, HeartbeatError> {
    if config.mode != FreshnessMode::TimeEpoch {
        return Err(HeartbeatError::WrongMode(FreshnessMode::TimeEpoch));
    }
    if config.interval_ms == 0 {
        return Err(HeartbeatError::ZeroInterval);
    }
    Ok(signed(parent, config.epoch_at(now_ms)))
}

/// Heartbeat whose epoch field carries a monotonic sequence number.
pub fn sequence_heartbeat_gen(
    parent: &AgentIdentity,
    seq: u64,
) -> Result<Heartbeat, HeartbeatError> {
    if seq == SENTINEL_EPOCH {
        return Err(HeartbeatError::SentinelSequence);
    }
    Ok(signed(parent, seq))
}

/// Explicit revocation: a validly signed heartbeat for the sentinel epoch.
pub fn revocation_heartbeat(parent: &AgentIdentity) -> Heartbeat {
    signed(parent, SENTINEL_EPOCH)
}

impl Heartbeat {
    pub fn is_sentinel(&self) -> bool {
        self.epoch == SENTINEL_EPOCH
    }

    /// Checks the commitment and signature invariants.
    pub fn check(&self) -> Result<(), HeartbeatError> {
        if commitment(&self.hpk, self.epoch) != self.commitment {
            return Err(HeartbeatError::CommitmentMismatch);
        }
        if !crypto::verify(&self.hpk, self.commitment.as_bytes(), &self.sig) {
            return Err(HeartbeatError::BadSignature);
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> [u8; FRAME_LEN] {
        let mut frame = [0u8; FRAME_LEN];
        frame[..32].copy_from_slice(self.commitment.as_bytes());
        frame[32..96].copy_from_slice(self.sig.as_bytes());
        frame[96..104].copy_from_slice(&self.epoch.to_be_bytes());
        frame[104..].copy_from_slice(self.hpk.as_bytes());
        frame
    }

    /// Parses a frame and re-checks commitment and signature.
    pub fn from_bytes(frame: &[u8]) -> Result<Self, HeartbeatError> {
        if frame.len() != FRAME_LEN {
            return Err(HeartbeatError::WrongLength(frame.len()));
        }
        let hpk =
            PublicPoint::from_bytes(&frame[104..]).map_err(|_| HeartbeatError::InvalidPoint)?;
        let hb = Self {
            commitment: Digest::from_slice(&frame[..32])?,
            sig: Signature::from_slice(&frame[32..96])?,
            epoch: u64::from_be_bytes(frame[96..104].try_into().expect("8-byte slice")),
            hpk,
        };
        hb.check()?;
        Ok(hb)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }

    pub fn from_hex(s: &str) -> Result<Self, HeartbeatError> {
        Self::from_bytes(&crypto::decode_hex(s)?)
    }
}

/// Contiguous run of pre-generated heartbeats.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrecomputeBuffer {
    pub heartbeats: Vec<Heartbeat>,
    pub horizon_epochs: u64,
}

impl PrecomputeBuffer {
    pub fn first_epoch(&self) -> Option<u64> {
        self.heartbeats.first().map(|h| h.epoch)
    }

    pub fn get(&self, epoch: u64) -> Option<&Heartbeat> {
        let first = self.first_epoch()?;
        let idx = epoch.checked_sub(first)?;
        self.heartbeats.get(usize::try_from(idx).ok()?)
    }

    /// Newest buffered heartbeat that is not ahead of `current_epoch`.
    pub fn latest_usable(&self, current_epoch: u64) -> Option<&Heartbeat> {
        self.heartbeats
            .iter()
            .rev()
            .find(|h| h.epoch <= current_epoch)
    }

    /// Wall-clock span covered by the buffer.
    pub fn span_ms(&self, interval_ms: u64) -> u64 {
        self.horizon_epochs * interval_ms
    }
}

pub fn precompute(
    parent: &AgentIdentity,
    start_epoch: u64,
    n: u64,
    config: &HeartbeatConfig,
) -> Result<PrecomputeBuffer, HeartbeatError> {
    precompute_with_cap(parent, start_epoch, n, config, DEFAULT_PRECOMPUTE_CAP)
}

pub fn precompute_with_cap(
    parent: &AgentIdentity,
    start_epoch: u64,
    n: u64,
    config: &HeartbeatConfig,
    cap: u64,
) -> Result<PrecomputeBuffer, HeartbeatError> {
    if config.interval_ms == 0 {
        return Err(HeartbeatError::ZeroInterval);
    }
    if n == 0 {
        return Err(HeartbeatError::EmptyHorizon);
    }
    if n > cap {
        return Err(HeartbeatError::HorizonExceeded { requested: n, cap });
    }
    let last = start_epoch
        .checked_add(n - 1)
        .ok_or(HeartbeatError::EpochOverflow)?;
    if last == SENTINEL_EPOCH {
        return Err(HeartbeatError::EpochOverflow);
    }
    Ok(PrecomputeBuffer {
        heartbeats: (start_epoch..=last).map(|e| signed(parent, e)).collect(),
        horizon_epochs: n,
    })
}

/// Push-model control-plane load: every child receives one frame per interval.
pub fn push_bandwidth_bytes_per_sec(children: u64, interval_ms: u64) -> f64 {
    if interval_ms == 0 {
        return 0.0;
    }
    (FRAME_LEN as u64 * children) as f64 * 1000.0 / interval_ms as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keys::{create_root, AgentId};

    fn parent() -> AgentIdentity {
        create_root(AgentId::new("p").unwrap(), &[3u8; 32]).unwrap()
    }

    fn time_cfg(interval_ms: u64) -> HeartbeatConfig {
        HeartbeatConfig::new(interval_ms, FreshnessMode::TimeEpoch).unwrap()
    }

    #[test]
    fn frame_is_168_bytes() {
        assert_eq!(FRAME_LEN, 168);
    }

    #[test]
    fn epoch_is_floor_of_time() {
        let p = parent();
        assert_eq!(
            heartbeat_gen(&p, 25_000, &time_cfg(10_000)).unwrap().epoch,
            2
        );
        assert_eq!(heartbeat_gen(&p, 0, &time_cfg(10_000)).unwrap().epoch, 0);
        let hb = heartbeat_gen(&p, 19_999, &time_cfg(10_000)).unwrap();
        assert_eq!(hb.epoch, 1);
        assert_eq!(hb.hpk, p.heartbeat_pk);
        hb.check().unwrap();
    }

    #[test]
    fn mode_and_interval_guards() {
        let p = parent();
        let seq = HeartbeatConfig {
            interval_ms: 10,
            mode: FreshnessMode::Sequence,
        };
        assert_eq!(
            heartbeat_gen(&p, 0, &seq),
            Err(HeartbeatError::WrongMode(FreshnessMode::TimeEpoch))
        );
        assert_eq!(
            HeartbeatConfig::new(0, FreshnessMode::TimeEpoch),
            Err(HeartbeatError::ZeroInterval)
        );
    }

    #[test]
    fn sequence_heartbeats() {
        let p = parent();
        let hbs: Vec<_> = (1..=3)
            .map(|s| sequence_heartbeat_gen(&p, s).unwrap())
            .collect();
        assert!(hbs.windows(2).all(|w| w[0].epoch < w[1].epoch));
        hbs.iter().for_each(|h| h.check().unwrap());
        assert_eq!(
            sequence_heartbeat_gen(&p, SENTINEL_EPOCH),
            Err(HeartbeatError::SentinelSequence)
        );
    }

    #[test]
    fn sentinel_heartbeat() {
        let p = parent();
        let hb = revocation_heartbeat(&p);
        assert_eq!(hb.epoch, 0xFFFF_FFFF_FFFF_FFFF);
        assert!(hb.is_sentinel());
        hb.check().unwrap();
        assert_eq!(Heartbeat::from_bytes(&hb.to_bytes()).unwrap(), hb);
    }

    #[test]
    fn precompute_buffer() {
        let p = parent();
        let cfg = time_cfg(1000);
        let buf = precompute(&p, 10, 3, &cfg).unwrap();
        let epochs: Vec<_> = buf.heartbeats.iter().map(|h| h.epoch).collect();
        assert_eq!(epochs, vec![10, 11, 12]);
        buf.heartbeats.iter().for_each(|h| h.check().unwrap());
        assert_eq!(buf.get(11).unwrap().epoch, 11);
        assert!(buf.get(9).is_none());
        assert_eq!(buf.latest_usable(11).unwrap().epoch, 11);
        assert_eq!(buf.latest_usable(50).unwrap().epoch, 12);
        assert!(buf.latest_usable(9).is_none());
        assert_eq!(buf.span_ms(1000), 3000);

        assert_eq!(
            precompute(&p, 0, 4, &cfg),
            Err(HeartbeatError::HorizonExceeded {
                requested: 4,
                cap: 3
            })
        );
        assert_eq!(
            precompute(&p, 0, 0, &cfg),
            Err(HeartbeatError::EmptyHorizon)
        );
        assert_eq!(
            precompute(&p, SENTINEL_EPOCH - 1, 2, &cfg),
            Err(HeartbeatError::EpochOverflow)
        );
    }

    #[test]
    fn frame_layout() {
        let p = parent();
        let hb = heartbeat_gen(&p, 70_000, &time_cfg(10_000)).unwrap();
        let frame = hb.to_bytes();
        assert_eq!(&frame[..32], hb.commitment.as_bytes());
        assert_eq!(&frame[32..96], hb.sig.as_bytes());
        assert_eq!(&frame[96..104], &7u64.to_be_bytes());
        assert_eq!(&frame[104..], p.heartbeat_pk.as_bytes());
        assert_eq!(Heartbeat::from_hex(&hb.to_hex()).unwrap(), hb);
        assert_eq!(
            Heartbeat::from_bytes(&frame[..167]),
            Err(HeartbeatError::WrongLength(167))
        );
    }

    #[test]
    fn bandwidth_identity() {
        assert_eq!(push_bandwidth_bytes_per_sec(1000, 10_000), 16_800.0);
        assert_eq!(push_bandwidth_bytes_per_sec(10, 2_000), 840.0);
        assert_eq!(push_bandwidth_bytes_per_sec(0, 2_000), 0.0);
        // reported in binary kilobytes
        assert!((push_bandwidth_bytes_per_sec(1000, 10_000) / 1024.0 - 16.4).abs() < 0.05);
    }
}
