use std::collections::BTreeMap;

use hbhc_core::FreshnessPolicy;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Simulation clock resolution.
pub const TICK_MS: u64 = 100;

/// Reserved entity name for the verifier in offsets and partitions.
pub const VERIFIER: &str = "verifier";

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("hierarchy needs at least one level with a positive branching factor")]
    EmptySpec,
    #[error("unknown agent {0:?}")]
    UnknownAgent(String),
    #[error("agent {0:?} has no children to revoke or exclude")]
    NotAParent(String),
    #[error("{child:?} is not a child of {parent:?}")]
    NotAChild { parent: String, child: String },
    #[error("agent {0:?} is already scheduled for revocation")]
    AlreadyRevoked(String),
    #[error("invalid event: {0}")]
    InvalidEvent(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("key derivation failed: {0}")]
    Keys(#[from] hbhc_core::KeyError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HierarchySpec {
    /// Branching factor per level below the root; `[3, 5, 2]` is 49 agents.
    pub levels: Vec<u32>,
    /// Root key seed, hex. Derived from the run seed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root_seed_hex: Option<String>,
}

impl HierarchySpec {
    pub fn new(levels: Vec<u32>) -> Self {
        Self {
            levels,
            root_seed_hex: None,
        }
    }

    pub fn with_seed(levels: Vec<u32>, seed: [u8; 32]) -> Self {
        Self {
            levels,
            root_seed_hex: Some(hex::encode(seed)),
        }
    }

    pub fn total_agents(&self) -> u64 {
        let mut total = 1u64;
        let mut width = 1u64;
        for b in &self.levels {
            width *= u64::from(*b);
            total += width;
        }
        total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum DeliveryModel {
    Push {
        drop_rate: f64,
    },
    DualPath {
        drop_rate_per_path: f64,
    },
    Precompute {
        buffer_epochs: u64,
        drop_rate: f64,
    },
    Pull {
        drop_rate: f64,
    },
    Gossip {
        fanout: u32,
        #[serde(default = "default_seed_set")]
        seed_set_size: u32,
        per_hop_drop: f64,
        /// Defaults to `ceil(log2 N) + 3`.
        #[serde(default)]
        max_rounds: Option<u32>,
    },
}

fn default_seed_set() -> u32 {
    5
}

impl DeliveryModel {
    pub fn push(drop_rate: f64) -> Self {
        Self::Push { drop_rate }
    }

    pub fn gossip(fanout: u32, per_hop_drop: f64) -> Self {
        Self::Gossip {
            fanout,
            seed_set_size: default_seed_set(),
            per_hop_drop,
            max_rounds: None,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let probs: &[f64] = match self {
            Self::Push { drop_rate }
            | Self::Pull { drop_rate }
            | Self::Precompute { drop_rate, .. } => &[*drop_rate][..],
            Self::DualPath { drop_rate_per_path } => &[*drop_rate_per_path][..],
            Self::Gossip { per_hop_drop, .. } => &[*per_hop_drop][..],
        };
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(SimError::InvalidConfig(
                "probabilities must lie in [0, 1]".into(),
            ));
        }
        match self {
            Self::Precompute {
                buffer_epochs: 0, ..
            } => Err(SimError::InvalidConfig(
                "buffer_epochs must be positive".into(),
            )),
            Self::Gossip {
                fanout,
                seed_set_size,
                max_rounds,
                ..
            } if *fanout == 0 || *seed_set_size == 0 || *max_rounds == Some(0) => {
                Err(SimError::InvalidConfig(
                    "gossip fanout, seed_set_size and max_rounds must be positive".into(),
                ))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuthCadence {
    /// One attempt per agent at the last tick of every epoch.
    PerEpoch,
    /// One attempt per agent every `n` ms of simulated time.
    EveryMs(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RevocationMode {
    /// The parent simply stops producing heartbeats.
    #[default]
    Implicit,
    /// The parent also broadcasts a signed sentinel.
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevocationEvent {
    pub agent: String,
    /// Epoch index relative to the run start. The parent still emits this
    /// epoch's heartbeat, then stops.
    pub at_epoch: u64,
    /// Kill time within the epoch, measured on the parent's clock.
    #[serde(default)]
    pub offset_ms: u64,
    #[serde(default)]
    pub mode: RevocationMode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusionEvent {
    pub parent: String,
    pub child: String,
    pub from_epoch: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionEvent {
    /// Agent ids, or [`VERIFIER`].
    pub entities: Vec<String>,
    pub from_epoch: u64,
    /// Exclusive.
    pub to_epoch: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerificationMode {
    /// Real challenge, proof and full verification per attempt.
    #[default]
    Full,
    /// Only the cheap checks (key lookup, sentinel latch, freshness). Honest
    /// agents always pass the signature checks, so outcomes are identical to
    /// `Full`; used for large sweeps.
    FreshnessOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheMode {
    #[default]
    Warm,
    Cold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub spec: HierarchySpec,
    pub delivery: DeliveryModel,
    pub policy: FreshnessPolicy,
    pub duration_epochs: u64,
    #[serde(default = "default_cadence")]
    pub auth_cadence: AuthCadence,
    #[serde(default)]
    pub revocation_events: Vec<RevocationEvent>,
    #[serde(default)]
    pub exclusion_events: Vec<ExclusionEvent>,
    #[serde(default)]
    pub partition_events: Vec<PartitionEvent>,
    /// Per-entity clock offsets; positive means the entity's clock runs ahead.
    #[serde(default)]
    pub clock_offsets_ms: BTreeMap<String, i64>,
    #[serde(default)]
    pub verification: VerificationMode,
    #[serde(default)]
    pub verifier_cache: CacheMode,
    /// Absolute epoch at which the run starts; keeps offset clocks positive.
    #[serde(default = "default_start_epoch")]
    pub start_epoch: u64,
    /// Keep the per-event rows used for CSV export.
    #[serde(default = "default_true")]
    pub trace_detail: bool,
    #[serde(default)]
    pub rng_seed: u64,
}

fn default_cadence() -> AuthCadence {
    AuthCadence::PerEpoch
}

fn default_start_epoch() -> u64 {
    1_000
}

fn default_true() -> bool {
    true
}

impl SimConfig {
    pub fn new(
        spec: HierarchySpec,
        delivery: DeliveryModel,
        policy: FreshnessPolicy,
        duration_epochs: u64,
    ) -> Self {
        Self {
            spec,
            delivery,
            policy,
            duration_epochs,
            auth_cadence: AuthCadence::PerEpoch,
            revocation_events: Vec::new(),
            exclusion_events: Vec::new(),
            partition_events: Vec::new(),
            clock_offsets_ms: BTreeMap::new(),
            verification: VerificationMode::Full,
            verifier_cache: CacheMode::Warm,
            start_epoch: default_start_epoch(),
            trace_detail: true,
            rng_seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn with_cadence(mut self, cadence: AuthCadence) -> Self {
        self.auth_cadence = cadence;
        self
    }

    pub fn with_verification(mut self, mode: VerificationMode) -> Self {
        self.verification = mode;
        self
    }

    pub fn revoke(mut self, agent: &str, at_epoch: u64) -> Self {
        self.revocation_events.push(RevocationEvent {
            agent: agent.into(),
            at_epoch,
            offset_ms: 0,
            mode: RevocationMode::Implicit,
        });
        self
    }

    pub fn offset(mut self, entity: &str, offset_ms: i64) -> Self {
        self.clock_offsets_ms.insert(entity.into(), offset_ms);
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.policy.validate().map_err(SimError::InvalidConfig)?;
        self.delivery.validate()?;
        if self.duration_epochs == 0 {
            return Err(SimError::InvalidConfig(
                "duration_epochs must be at least 1".into(),
            ));
        }
        if self.policy.interval_ms % TICK_MS != 0 {
            return Err(SimError::InvalidConfig(format!(
                "interval_ms must be a multiple of {TICK_MS}"
            )));
        }
        if let AuthCadence::EveryMs(ms) = self.auth_cadence {
            if ms == 0 || ms % TICK_MS != 0 {
                return Err(SimError::InvalidConfig(format!(
                    "cadence must be a positive multiple of {TICK_MS} ms"
                )));
            }
        }
        let horizon = i128::from(self.start_epoch) * i128::from(self.policy.interval_ms);
        if self
            .clock_offsets_ms
            .values()
            .any(|o| i128::from(*o) + horizon < 0)
        {
            return Err(SimError::InvalidConfig(
                "clock offset reaches before time zero; raise start_epoch".into(),
            ));
        }
        Ok(())
    }
}
