//! Where services send their audit events.

use std::future::Future;
use std::pin::Pin;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use medshare_core::audit::{AuditEvent, AuditLog};

pub const PEER_SECRET_HEADER: &str = "x-peer-secret";

#[derive(Debug, Error)]
pub enum SinkError {
    #[error("log service unreachable: {0}")]
    Unreachable(String),
    #[error("log service answered {0}")]
    Rejected(u16),
    #[error("local log append failed: {0}")]
    Local(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Appended {
    pub seq: u64,
}

pub type SinkFuture<'a> = Pin<Box<dyn Future<Output = Result<u64, SinkError>> + Send + 'a>>;

pub trait AuditSink: Send + Sync {
    /// Record one event and return its sequence number.
    fn record(&self, event: AuditEvent) -> SinkFuture<'_>;
}

/// Posts events to the log service.
pub struct HttpSink {
    client: reqwest::Client,
    url: String,
    secret: String,
}

impl HttpSink {
    pub fn new(client: reqwest::Client, log_base_url: &str, secret: &[u8]) -> Self {
        Self {
            client,
            url: format!("{}/log/entries", log_base_url.trim_end_matches('/')),
            secret: String::from_utf8_lossy(secret).into_owned(),
        }
    }
}

impl AuditSink for HttpSink {
    fn record(&self, event: AuditEvent) -> SinkFuture<'_> {
        Box::pin(async move {
            let resp = self
                .client
                .post(&self.url)
                .header(PEER_SECRET_HEADER, &self.secret)
                .timeout(Duration::from_secs(5))
                .json(&event)
                .send()
                .await
                .map_err(|e| SinkError::Unreachable(e.to_string()))?;
            if !resp.status().is_success() {
                return Err(SinkError::Rejected(resp.status().as_u16()));
            }
            let body: Appended = resp
                .json()
                .await
                .map_err(|e| SinkError::Unreachable(e.to_string()))?;
            Ok(body.seq)
        })
    }
}

/// Appends straight to a log file in this process.
#[derive(Clone)]
pub struct LocalSink {
    log: Arc<Mutex<AuditLog>>,
}

impl LocalSink {
    pub fn new(log: AuditLog) -> Self {
        Self {
            log: Arc::new(Mutex::new(log)),
        }
    }
}

impl AuditSink for LocalSink {
    fn record(&self, event: AuditEvent) -> SinkFuture<'_> {
        let result = {
            let mut log = self.log.lock().unwrap_or_else(|p| p.into_inner());
            log.append(event, chrono::Utc::now().timestamp_millis())
                .map(|e| e.seq)
                .map_err(|e| SinkError::Local(e.to_string()))
        };
        Box::pin(async move { result })
    }
}
