//! Deterministic discrete-time simulation of heartbeat-bound agent swarms,
//! plus the experiment suite built on top of it.

pub mod config;
pub mod engine;
pub mod experiments;
pub mod gossip;
pub mod rng;
pub mod swarm;
pub mod trace;

pub use config::{
    AuthCadence, CacheMode, DeliveryModel, ExclusionEvent, HierarchySpec, PartitionEvent,
    RevocationEvent, RevocationMode, SimConfig, SimError, VerificationMode, TICK_MS, VERIFIER,
};
pub use engine::{run, Simulation};
pub use gossip::{gossip_round, GossipOverlay};
pub use swarm::{build_swarm, Agent, Swarm};
pub use trace::{AttemptRecord, EpochStats, NetworkMeter, Outcome, SimTrace, ZombieWindow};
