//! HTTP front end for offline heartbeat-bound verification, plus a load
//! generator that drives the full challenge, proof and verify flow.
//!
//! The service adds transport only: every decision equals what
//! [`hbhc_core::verify::verify_auth`] returns for the same inputs at the
//! service clock. Verification never performs outbound network I/O.

mod bench;
mod config;
mod server;

pub use bench::{bench, BenchConfig, BenchRecord, BenchReport};
pub use config::{ServiceConfig, DEFAULT_MAX_IN_FLIGHT, DEFAULT_PORT};
pub use server::{
    router, serve, spawn, system_clock, ChallengeResponse, ChallengeStatus, Clock, HealthResponse,
    RegisterRequest, RegisterResponse, Registration, RunningServer, VerifierService, VerifyOutcome,
    VerifyRequest, VerifyResponse,
};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("client: {0}")]
    Client(String),
    #[error("runtime: {0}")]
    Runtime(String),
    #[error(transparent)]
    Key(#[from] hbhc_core::KeyError),
    #[error(transparent)]
    Heartbeat(#[from] hbhc_core::HeartbeatError),
}
