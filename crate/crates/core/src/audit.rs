//! Append-only, hash-chained audit log.
//!
//! One JSON object per line. Each entry's hash is SHA-256 over this byte
//! layout, fields in declaration order:
//!
//! ```text
//! seq        u64 big-endian
//! timestamp  i64 big-endian (milliseconds since the Unix epoch)
//! principal  u32 big-endian byte length, then UTF-8 bytes
//! jti        (same)
//! action     (same, wire name such as "query_execute")
//! detail     (same)
//! outcome    (same, "ok" or "error")
//! prev_hash  32 raw bytes, all zero for seq 1
//! ```
//!
//! Lines must be in canonical form (the exact bytes this module writes). Any
//! other spelling of an entry, even one that parses, counts as tampering.

use std::fmt;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const HASH_LEN: usize = 32;
pub const ANONYMOUS: &str = "anonymous";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditAction {
    AuthSuccess,
    AuthFailure,
    CatalogView,
    QueryExecute,
    QueryDenied,
    InputBlocked,
    TokenRejected,
}

impl AuditAction {
    pub fn as_str(self) -> &'static str {
        match self {
            AuditAction::AuthSuccess => "auth_success",
            AuditAction::AuthFailure => "auth_failure",
            AuditAction::CatalogView => "catalog_view",
            AuditAction::QueryExecute => "query_execute",
            AuditAction::QueryDenied => "query_denied",
            AuditAction::InputBlocked => "input_blocked",
            AuditAction::TokenRejected => "token_rejected",
        }
    }
}

impl fmt::Display for AuditAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Ok,
    Error,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Ok => "ok",
            Outcome::Error => "error",
        }
    }
}

/// The caller-supplied part of an entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditEvent {
    pub principal: String,
    #[serde(default)]
    pub jti: String,
    pub action: AuditAction,
    #[serde(default)]
    pub detail: String,
    pub outcome: Outcome,
}

impl AuditEvent {
    pub fn new(
        principal: &str,
        jti: &str,
        action: AuditAction,
        detail: impl Into<String>,
        outcome: Outcome,
    ) -> Self {
        Self {
            principal: principal.to_string(),
            jti: jti.to_string(),
            action,
            detail: detail.into(),
            outcome,
        }
    }
}

mod hex32 {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8; 32], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 32], D::Error> {
        let text = String::deserialize(d)?;
        let mut out = [0u8; 32];
        hex::decode_to_slice(&text, &mut out).map_err(D::Error::custom)?;
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditEntry {
    pub seq: u64,
    pub timestamp: i64,
    pub principal: String,
    pub jti: String,
    pub action: AuditAction,
    pub detail: String,
    pub outcome: Outcome,
    #[serde(with = "hex32")]
    pub prev_hash: [u8; HASH_LEN],
    #[serde(with = "hex32")]
    pub entry_hash: [u8; HASH_LEN],
}

impl AuditEntry {
    pub fn compute_hash(&self) -> [u8; HASH_LEN] {
        let mut h = Sha256::new();
        h.update(self.seq.to_be_bytes());
        h.update(self.timestamp.to_be_bytes());
        for field in [
            self.principal.as_str(),
            self.jti.as_str(),
            self.action.as_str(),
            self.detail.as_str(),
            self.outcome.as_str(),
        ] {
            h.update((field.len() as u32).to_be_bytes());
            h.update(field.as_bytes());
        }
        h.update(self.prev_hash);
        h.finalize().into()
    }

    /// The exact line written to disk, without the trailing newline.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("audit entries serialize")
    }

    /// Parse a line, accepting only the canonical spelling.
    pub fn from_line(line: &[u8]) -> Option<Self> {
        let entry: AuditEntry = serde_json::from_slice(line).ok()?;
        (entry.to_line().as_bytes() == line).then_some(entry)
    }
}

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("audit log i/o failure on {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("audit log {path} has an unreadable last entry")]
    CorruptTail { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainStatus {
    Intact { entries: u64 },
    Broken { seq: u64 },
}

impl fmt::Display for ChainStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChainStatus::Intact { .. } => f.write_str("intact"),
            ChainStatus::Broken { seq } => write!(f, "broken at seq {seq}"),
        }
    }
}

/// Single-writer handle on a log file. Wrap in a mutex to share.
#[derive(Debug)]
pub struct AuditLog {
    path: PathBuf,
    next_seq: u64,
    last_hash: [u8; HASH_LEN],
    durable: bool,
}

impl AuditLog {
    /// Open or create the log at `path`, resuming after its last entry.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, AuditError> {
        let path = path.as_ref().to_path_buf();
        let mut log = Self {
            path,
            next_seq: 1,
            last_hash: [0; HASH_LEN],
            durable: true,
        };
        let bytes = match std::fs::read(&log.path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(log),
            Err(source) => {
                return Err(AuditError::IoFailure {
                    path: log.path,
                    source,
                })
            }
        };
        if bytes.is_empty() {
            return Ok(log);
        }
        let last = bytes
            .strip_suffix(b"\n")
            .and_then(|body| body.split(|&b| b == b'\n').next_back())
            .and_then(AuditEntry::from_line)
            .filter(|e| e.entry_hash == e.compute_hash())
            .ok_or_else(|| AuditError::CorruptTail {
                path: log.path.clone(),
            })?;
        log.next_seq = last.seq + 1;
        log.last_hash = last.entry_hash;
        Ok(log)
    }

    /// Skip the fsync after each append. Meant for bulk fixtures in tests.
    pub fn durable(mut self, durable: bool) -> Self {
        self.durable = durable;
        self
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    /// Persist the next entry. Sequence and chain state advance only after
    /// the line is written, so a failed append can be retried.
    pub fn append(
        &mut self,
        event: AuditEvent,
        timestamp_ms: i64,
    ) -> Result<AuditEntry, AuditError> {
        let mut entry = AuditEntry {
            seq: self.next_seq,
            timestamp: timestamp_ms,
            principal: event.principal,
            jti: event.jti,
            action: event.action,
            detail: event.detail,
            outcome: event.outcome,
            prev_hash: self.last_hash,
            entry_hash: [0; HASH_LEN],
        };
        entry.entry_hash = entry.compute_hash();
        let mut line = entry.to_line();
        line.push('\n');
        let io_err = |source| AuditError::IoFailure {
            path: self.path.clone(),
            source,
        };
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(io_err)?;
        file.write_all(line.as_bytes()).map_err(io_err)?;
        if self.durable {
            file.sync_data().map_err(io_err)?;
        }
        self.next_seq += 1;
        self.last_hash = entry.entry_hash;
        Ok(entry)
    }
}

/// Recompute the chain in `bytes` and report the lowest failing position.
pub fn verify_bytes(bytes: &[u8]) -> ChainStatus {
    if bytes.is_empty() {
        return ChainStatus::Intact { entries: 0 };
    }
    let body = match bytes.strip_suffix(b"\n") {
        Some(b) => b,
        None => {
            // A final line without its newline is a torn or altered write.
            let complete = bytes.iter().filter(|&&b| b == b'\n').count() as u64;
            return match verify_bytes(
                &bytes[..bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1)],
            ) {
                ChainStatus::Intact { .. } => ChainStatus::Broken { seq: complete + 1 },
                broken => broken,
            };
        }
    };
    let mut prev = [0u8; HASH_LEN];
    let mut count = 0u64;
    for (i, line) in body.split(|&b| b == b'\n').enumerate() {
        let expected_seq = i as u64 + 1;
        let ok = AuditEntry::from_line(line).filter(|e| {
            e.seq == expected_seq && e.prev_hash == prev && e.entry_hash == e.compute_hash()
        });
        match ok {
            Some(e) => {
                prev = e.entry_hash;
                count = expected_seq;
            }
            None => return ChainStatus::Broken { seq: expected_seq },
        }
    }
    ChainStatus::Intact { entries: count }
}

pub fn verify_chain(path: impl AsRef<Path>) -> Result<ChainStatus, AuditError> {
    let path = path.as_ref();
    match std::fs::read(path) {
        Ok(bytes) => Ok(verify_bytes(&bytes)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            Ok(ChainStatus::Intact { entries: 0 })
        }
        Err(source) => Err(AuditError::IoFailure {
            path: path.to_path_buf(),
            source,
        }),
    }
}

/// The last `n` parseable entries, oldest first.
pub fn tail(path: impl AsRef<Path>, n: usize) -> Result<Vec<AuditEntry>, AuditError> {
    let path = path.as_ref();
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(source) => {
            return Err(AuditError::IoFailure {
                path: path.to_path_buf(),
                source,
            })
        }
    };
    let mut entries: Vec<AuditEntry> = bytes
        .split(|&b| b == b'\n')
        .filter(|l| !l.is_empty())
        .rev()
        .filter_map(|l| serde_json::from_slice(l).ok())
        .take(n)
        .collect();
    entries.reverse();
    Ok(entries)
}
