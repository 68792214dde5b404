use std::net::{IpAddr, Ipv4Addr, SocketAddr};

use hbhc_core::verify::DEFAULT_CHALLENGE_TTL_MS;
use hbhc_core::FreshnessPolicy;

use crate::ServiceError;

pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_MAX_IN_FLIGHT: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub bind: IpAddr,
    /// Port 0 asks the OS for a free port.
    pub port: u16,
    pub challenge_ttl_ms: u64,
    pub policy: FreshnessPolicy,
    /// Requests served concurrently; extra requests queue.
    pub max_in_flight: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port: DEFAULT_PORT,
            challenge_ttl_ms: DEFAULT_CHALLENGE_TTL_MS,
            policy: FreshnessPolicy::time_epoch(10_000, 3),
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
        }
    }
}

impl ServiceConfig {
    /// Defaults overridden by `HBHC_BIND` and `HBHC_PORT` when set.
    pub fn from_env() -> Result<Self, ServiceError> {
        let mut cfg = Self::default();
        if let Ok(bind) = std::env::var("HBHC_BIND") {
            cfg.bind = bind
                .parse()
                .map_err(|_| ServiceError::Config(format!("HBHC_BIND: bad address {bind:?}")))?;
        }
        if let Ok(port) = std::env::var("HBHC_PORT") {
            cfg.port = port
                .parse()
                .map_err(|_| ServiceError::Config(format!("HBHC_PORT: bad port {port:?}")))?;
        }
        Ok(cfg)
    }

    pub fn addr(&self) -> SocketAddr {
        SocketAddr::new(self.bind, self.port)
    }

    pub fn validate(&self) -> Result<(), ServiceError> {
        self.policy.validate().map_err(ServiceError::Config)?;
        if self.challenge_ttl_ms == 0 || self.max_in_flight == 0 {
            return Err(ServiceError::Config(
                "challenge_ttl_ms and max_in_flight must be positive".into(),
            ));
        }
        Ok(())
    }
}
