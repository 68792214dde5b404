use hbhc_core::crypto;
use hbhc_core::keys::{create_root, CredentialIssuer};
use hbhc_core::{AgentId, AgentIdentity, Credential, VerifierState};

use crate::config::{HierarchySpec, SimError};

#[derive(Debug, Clone)]
pub struct Agent {
    pub identity: AgentIdentity,
    /// `None` for the root.
    pub credential: Option<Credential>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

impl Agent {
    pub fn id(&self) -> &AgentId {
        &self.identity.agent_id
    }

    pub fn level(&self) -> u32 {
        self.identity.level
    }

    pub fn is_parent(&self) -> bool {
        !self.children.is_empty()
    }
}

/// An agent tree in breadth-first order (index 0 is the root) plus a
/// verifier that already trusts every parent's heartbeat key.
#[derive(Debug, Clone)]
pub struct Swarm {
    pub agents: Vec<Agent>,
    pub verifier: VerifierState,
}

impl Swarm {
    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.agents.iter().position(|a| a.id().as_str() == id)
    }

    /// Strict descendants of `idx`, breadth-first.
    pub fn descendants(&self, idx: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut frontier = self.agents[idx].children.clone();
        while !frontier.is_empty() {
            out.extend_from_slice(&frontier);
            frontier = frontier
                .iter()
                .flat_map(|c| self.agents[*c].children.iter().copied())
                .collect();
        }
        out
    }

    /// Ancestors of `idx`, nearest first.
    pub fn ancestors(&self, idx: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut cur = self.agents[idx].parent;
        while let Some(p) = cur {
            out.push(p);
            cur = self.agents[p].parent;
        }
        out
    }

    pub fn parents(&self) -> impl Iterator<Item = usize> + '_ {
        self.agents
            .iter()
            .enumerate()
            .filter(|(_, a)| a.is_parent())
            .map(|(i, _)| i)
    }
}

pub fn default_root_seed(rng_seed: u64) -> [u8; 32] {
    *crypto::hash_parts(&[b"sim-root-seed", &rng_seed.to_be_bytes()]).as_bytes()
}

fn parse_seed(spec: &HierarchySpec, rng_seed: u64) -> Result<[u8; 32], SimError> {
    match &spec.root_seed_hex {
        None => Ok(default_root_seed(rng_seed)),
        Some(h) => hex::decode(h)
            .ok()
            .and_then(|v| <[u8; 32]>::try_from(v).ok())
            .ok_or_else(|| SimError::InvalidConfig("root_seed_hex must be 32 bytes of hex".into())),
    }
}

/// Derives every identity and credential for `spec`. Agent ids are dotted
/// paths: `root`, `root.0`, `root.0.3`, ...
pub fn build_swarm(spec: &HierarchySpec, rng_seed: u64) -> Result<Swarm, SimError> {
    if spec.levels.is_empty() || spec.levels.contains(&0) {
        return Err(SimError::EmptySpec);
    }
    let seed = parse_seed(spec, rng_seed)?;
    let root = create_root(AgentId::new("root")?, &seed)?;
    let mut agents = vec![Agent {
        identity: root,
        credential: None,
        parent: None,
        children: Vec::new(),
    }];
    let mut frontier = vec![0usize];
    for &branching in &spec.levels {
        let mut next = Vec::with_capacity(frontier.len() * branching as usize);
        for &p in &frontier {
            let parent_identity = agents[p].identity.clone();
            let mut issuer = CredentialIssuer::new(&parent_identity);
            for i in 0..branching {
                let child_id = AgentId::new(format!("{}.{i}", parent_identity.agent_id))?;
                let (cred, identity) = issuer.issue(&child_id, 0)?;
                let idx = agents.len();
                agents.push(Agent {
                    identity,
                    credential: Some(cred),
                    parent: Some(p),
                    children: Vec::new(),
                });
                agents[p].children.push(idx);
                next.push(idx);
            }
        }
        frontier = next;
    }
    let mut verifier = VerifierState::new();
    for a in agents.iter().filter(|a| a.is_parent()) {
        verifier.cache_parent_key(a.id().clone(), a.identity.heartbeat_pk);
    }
    Ok(Swarm { agents, verifier })
}
