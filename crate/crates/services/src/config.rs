//! Per-process service configuration.
//!
//! ```toml
//! kind = "health_record"
//! listen_address = "127.0.0.1:8083"
//! data_dir = "data"
//! rbac_path = "rbac.toml"
//! signing_secret_path = "secrets/signing.key"
//! peer_secret_path = "secrets/peer.key"
//!
//! [peers]
//! log = "http://127.0.0.1:8085"
//! ```
//!
//! Relative paths resolve against the directory holding the config file.
//! `MEDSHARE_LISTEN`, `MEDSHARE_SIGNING_SECRET_PATH` and
//! `MEDSHARE_PEER_SECRET_PATH` override the matching keys.

use std::collections::BTreeMap;
use std::fmt;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use medshare_core::guard::{GuardConfig, DEFAULT_ANTI_INJECTION, DEFAULT_BLOCKLIST};
use medshare_core::synth::DEFAULT_REFERENCE_DATE;

pub const ENV_LISTEN: &str = "MEDSHARE_LISTEN";
pub const ENV_SIGNING_SECRET_PATH: &str = "MEDSHARE_SIGNING_SECRET_PATH";
pub const ENV_PEER_SECRET_PATH: &str = "MEDSHARE_PEER_SECRET_PATH";

pub const DEFAULT_TOKEN_TTL_SECONDS: i64 = 900;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ServiceKind {
    Auth,
    Catalog,
    HealthRecord,
    MedicalRecord,
    Log,
}

impl ServiceKind {
    pub const ALL: [ServiceKind; 5] = [
        ServiceKind::Auth,
        ServiceKind::Catalog,
        ServiceKind::HealthRecord,
        ServiceKind::MedicalRecord,
        ServiceKind::Log,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ServiceKind::Auth => "auth",
            ServiceKind::Catalog => "catalog",
            ServiceKind::HealthRecord => "health_record",
            ServiceKind::MedicalRecord => "medical_record",
            ServiceKind::Log => "log",
        }
    }

    fn required_peers(self) -> &'static [ServiceKind] {
        use ServiceKind::*;
        match self {
            Auth | HealthRecord | MedicalRecord => &[Log],
            Catalog => &[Log, Auth, HealthRecord, MedicalRecord],
            Log => &[],
        }
    }
}

impl fmt::Display for ServiceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ServiceKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ServiceKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| ConfigError::Invalid(format!("unknown service kind {s}")))
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GuardOverrides {
    pub blocklist: Option<Vec<String>>,
    pub anti_injection: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    pub kind: ServiceKind,
    pub listen_address: String,
    #[serde(default)]
    pub peers: BTreeMap<ServiceKind, String>,
    pub data_dir: Option<PathBuf>,
    pub rbac_path: Option<PathBuf>,
    pub signing_secret_path: Option<PathBuf>,
    pub peer_secret_path: Option<PathBuf>,
    pub log_path: Option<PathBuf>,
    #[serde(default = "default_ttl")]
    pub token_ttl_seconds: i64,
    #[serde(default = "default_reference_date")]
    pub reference_date: NaiveDate,
    #[serde(default = "default_key_id")]
    pub key_id: String,
    #[serde(default)]
    pub guard: GuardOverrides,
}

fn default_ttl() -> i64 {
    DEFAULT_TOKEN_TTL_SECONDS
}

fn default_reference_date() -> NaiveDate {
    DEFAULT_REFERENCE_DATE
}

fn default_key_id() -> String {
    "default".to_string()
}

impl ServiceConfig {
    /// Read, apply environment overrides, resolve paths and validate.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Self::parse(&text)?;
        config.apply_env(|k| std::env::var(k).ok());
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        config.validate()?;
        Ok(config)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Invalid(e.message().to_string()))
    }

    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) {
        if let Some(v) = get(ENV_LISTEN) {
            self.listen_address = v;
        }
        if let Some(v) = get(ENV_SIGNING_SECRET_PATH) {
            self.signing_secret_path = Some(v.into());
        }
        if let Some(v) = get(ENV_PEER_SECRET_PATH) {
            self.peer_secret_path = Some(v.into());
        }
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        for p in [
            &mut self.data_dir,
            &mut self.rbac_path,
            &mut self.signing_secret_path,
            &mut self.peer_secret_path,
            &mut self.log_path,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.listen_address.parse::<SocketAddr>().is_err() {
            return invalid(format!(
                "listen_address {} is not host:port",
                self.listen_address
            ));
        }
        for peer in self.kind.required_peers() {
            if !self.peers.contains_key(peer) {
                return invalid(format!("{} needs peers.{}", self.kind, peer));
            }
        }
        let need = |field: &Option<PathBuf>, name: &str| match field {
            Some(_) => Ok(()),
            None => Err(ConfigError::Invalid(format!("{} needs {name}", self.kind))),
        };
        need(&self.peer_secret_path, "peer_secret_path")?;
        match self.kind {
            ServiceKind::Log => need(&self.log_path, "log_path")?,
            ServiceKind::Auth | ServiceKind::Catalog => {
                need(&self.rbac_path, "rbac_path")?;
                need(&self.signing_secret_path, "signing_secret_path")?;
            }
            ServiceKind::HealthRecord | ServiceKind::MedicalRecord => {
                need(&self.rbac_path, "rbac_path")?;
                need(&self.signing_secret_path, "signing_secret_path")?;
                need(&self.data_dir, "data_dir")?;
            }
        }
        if self.token_ttl_seconds <= 0 {
            return invalid("token_ttl_seconds must be positive".into());
        }
        self.guard_config()?;
        Ok(())
    }

    pub fn guard_config(&self) -> Result<GuardConfig, ConfigError> {
        let blocklist = match &self.guard.blocklist {
            Some(b) => b.clone(),
            None => DEFAULT_BLOCKLIST.iter().map(|s| s.to_string()).collect(),
        };
        let anti = match &self.guard.anti_injection {
            Some(a) => a.clone(),
            None => DEFAULT_ANTI_INJECTION
                .iter()
                .map(|s| s.to_string())
                .collect(),
        };
        GuardConfig::new(blocklist, anti).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn peer(&self, kind: ServiceKind) -> Option<&str> {
        self.peers.get(&kind).map(|s| s.trim_end_matches('/'))
    }
}

/// Read a secret file, dropping one trailing newline.
pub fn read_secret(path: &Path) -> Result<Vec<u8>, ConfigError> {
    let mut bytes = std::fs::read(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    if bytes.last() == Some(&b'\n') {
        bytes.pop();
        if bytes.last() == Some(&b'\r') {
            bytes.pop();
        }
    }
    if bytes.is_empty() {
        return Err(ConfigError::Invalid(format!("{} is empty", path.display())));
    }
    Ok(bytes)
}
