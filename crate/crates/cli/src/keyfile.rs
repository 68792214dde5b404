//! On-disk identity files. Secret and public material live in separate
//! files: `<path>` holds the identity scalar, `<path>.pub` the public keys.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use hbhc_core::{AgentId, AgentIdentity, SecretScalar};
use serde::{Deserialize, Serialize};

#[derive(Debug, Serialize, Deserialize)]
pub struct SecretFile {
    pub agent_id: String,
    pub level: u32,
    pub identity_sk_hex: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PublicFile {
    pub agent_id: String,
    pub level: u32,
    pub identity_pk_hex: String,
    pub heartbeat_pk_hex: String,
}

impl PublicFile {
    pub fn of(id: &AgentIdentity) -> Self {
        Self {
            agent_id: id.agent_id.to_string(),
            level: id.level,
            identity_pk_hex: id.identity_pk.to_hex(),
            heartbeat_pk_hex: id.heartbeat_pk.to_hex(),
        }
    }
}

pub fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Writes `<path>` and `<path>.pub`; returns the public part.
pub fn write_identity(path: &Path, id: &AgentIdentity) -> Result<PublicFile> {
    let secret = SecretFile {
        agent_id: id.agent_id.to_string(),
        level: id.level,
        identity_sk_hex: hex::encode(id.identity_sk.to_bytes()),
    };
    std::fs::write(path, serde_json::to_string_pretty(&secret)?)
        .with_context(|| format!("writing {}", path.display()))?;
    let public = PublicFile::of(id);
    let pub_path = with_suffix(path, ".pub");
    std::fs::write(&pub_path, serde_json::to_string_pretty(&public)?)
        .with_context(|| format!("writing {}", pub_path.display()))?;
    Ok(public)
}

pub fn read_identity(path: &Path) -> Result<AgentIdentity> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let secret: SecretFile =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let bytes = hex::decode(&secret.identity_sk_hex).context("identity_sk_hex is not hex")?;
    let sk = SecretScalar::from_canonical_bytes(&bytes)
        .context("identity_sk_hex is not a valid scalar")?;
    Ok(AgentIdentity::from_identity_scalar(
        AgentId::new(secret.agent_id)?,
        sk,
        secret.level,
    )?)
}
