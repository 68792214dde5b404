use std::collections::BTreeMap;
use std::io::Write;

use hbhc_core::RejectReason;
use serde::{Deserialize, Serialize};

use crate::config::RevocationMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Accept,
    Reject(RejectReason),
    /// The agent held no usable heartbeat and could not build a proof.
    NoHeartbeat,
}

impl Outcome {
    pub fn is_accept(&self) -> bool {
        matches!(self, Self::Accept)
    }

    pub fn label(&self) -> &'static str {
        if self.is_accept() {
            "accept"
        } else {
            "reject"
        }
    }

    pub fn reason(&self) -> &'static str {
        match self {
            Self::Accept => "",
            Self::Reject(r) => r.as_str(),
            Self::NoHeartbeat => "NoHeartbeat",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptRecord {
    /// True time since the run started.
    pub time_ms: u64,
    pub epoch: u64,
    pub agent: usize,
    pub outcome: Outcome,
    pub age_epochs: Option<i64>,
    pub presented_epoch: Option<u64>,
    /// No ancestor revoked and no exclusion on the agent's path.
    pub legitimate: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: u64,
    pub live_parents: u64,
    pub heartbeats_generated: u64,
    pub signatures: u64,
    pub deliveries_attempted: u64,
    pub deliveries_succeeded: u64,
    pub auth_attempts: u64,
    pub auth_accepted: u64,
    pub gossip_reached: u64,
    pub gossip_targets: u64,
    pub active: u64,
    pub zombie: u64,
    pub terminated: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventType {
    HeartbeatEmit,
    Delivery,
    Auth,
    Revoke,
    Shutdown,
    State,
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub epoch: u64,
    pub agent_id: String,
    pub level: u32,
    pub event_type: EventType,
    pub outcome: String,
    pub reject_reason: String,
    pub heartbeat_age_epochs: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentInfo {
    pub id: String,
    pub level: u32,
    pub parent: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevocationRecord {
    pub agent: usize,
    pub at_epoch: u64,
    /// True time of the kill since the run started.
    pub t_r_ms: u64,
    pub mode: RevocationMode,
}

/// Messages sent and received per entity. Verification itself never
/// touches this.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkMeter {
    pub sent: BTreeMap<String, u64>,
    pub received: BTreeMap<String, u64>,
}

impl NetworkMeter {
    pub fn record(&mut self, from: &str, to: &str) {
        *self.sent.entry(from.to_string()).or_default() += 1;
        *self.received.entry(to.to_string()).or_default() += 1;
    }

    pub fn ops(&self, entity: &str) -> u64 {
        self.sent.get(entity).copied().unwrap_or(0)
            + self.received.get(entity).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.sent.values().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZombieWindow {
    pub revoked: usize,
    pub t_r_ms: u64,
    /// Last accepted descendant attempt minus `t_r`; zero if none.
    pub w_z_ms: u64,
    pub per_level_max_ms: BTreeMap<u32, u64>,
    pub descendants: usize,
    /// Descendants whose final attempt in the run was rejected.
    pub denied_at_end: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimTrace {
    pub interval_ms: u64,
    pub agents: Vec<AgentInfo>,
    pub attempts: Vec<AttemptRecord>,
    pub epochs: Vec<EpochStats>,
    pub records: Vec<TraceRecord>,
    pub revocations: Vec<RevocationRecord>,
    pub network: NetworkMeter,
    /// Longest run of consecutive missed deliveries for any single child.
    pub max_consecutive_missed: u64,
}

impl SimTrace {
    pub fn legitimate_attempts(&self) -> u64 {
        self.attempts.iter().filter(|a| a.legitimate).count() as u64
    }

    pub fn legitimate_denied(&self) -> u64 {
        self.attempts
            .iter()
            .filter(|a| a.legitimate && !a.outcome.is_accept())
            .count() as u64
    }

    /// False-positive revocation rate as a fraction.
    pub fn fprr(&self) -> f64 {
        let total = self.legitimate_attempts();
        if total == 0 {
            0.0
        } else {
            self.legitimate_denied() as f64 / total as f64
        }
    }

    pub fn is_descendant(&self, agent: usize, of: usize) -> bool {
        let mut cur = self.agents[agent].parent;
        while let Some(p) = cur {
            if p == of {
                return true;
            }
            cur = self.agents[p].parent;
        }
        false
    }

    pub fn zombie_windows(&self) -> Vec<ZombieWindow> {
        self.revocations
            .iter()
            .map(|rev| {
                let mut per_level: BTreeMap<u32, u64> = BTreeMap::new();
                let mut last_outcome: BTreeMap<usize, bool> = BTreeMap::new();
                let mut w_z = 0;
                for a in self
                    .attempts
                    .iter()
                    .filter(|a| self.is_descendant(a.agent, rev.agent))
                {
                    last_outcome.insert(a.agent, a.outcome.is_accept());
                    if a.outcome.is_accept() && a.time_ms >= rev.t_r_ms {
                        let w = a.time_ms - rev.t_r_ms;
                        w_z = w_z.max(w);
                        let lvl = per_level.entry(self.agents[a.agent].level).or_default();
                        *lvl = (*lvl).max(w);
                    }
                }
                let descendants = (0..self.agents.len())
                    .filter(|i| self.is_descendant(*i, rev.agent))
                    .count();
                ZombieWindow {
                    revoked: rev.agent,
                    t_r_ms: rev.t_r_ms,
                    w_z_ms: w_z,
                    per_level_max_ms: per_level,
                    descendants,
                    denied_at_end: last_outcome.values().filter(|ok| !**ok).count(),
                }
            })
            .collect()
    }

    pub fn attempts_for(&self, agent: usize) -> impl Iterator<Item = &AttemptRecord> {
        self.attempts.iter().filter(move |a| a.agent == agent)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.records {
            w.serialize(r)?;
        }
        if self.records.is_empty() {
            w.write_record([
                "epoch",
                "agent_id",
                "level",
                "event_type",
                "outcome",
                "reject_reason",
                "heartbeat_age_epochs",
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}
