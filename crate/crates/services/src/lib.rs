//! HTTP services: auth, catalog, health-record, medical-record and log.
//!
//! All five are built from this crate and told apart by
//! [`ServiceKind`]. Resource services verify bearer tokens locally with the
//! shared signing secret and send one audit event per request to the log
//! service. If that event cannot be recorded the request fails.

pub mod config;
pub mod error;
mod handlers;
pub mod sink;

use std::sync::Arc;
use std::time::Duration;

use axum::Router;
use thiserror::Error;

use medshare_core::audit::AuditLog;
use medshare_core::query::{EngineConfig, ResourceService};
use medshare_core::store::load_tables;
use medshare_core::token::SigningKey;
use medshare_core::{Gateway, QueryRegistry, RbacStore};

pub use config::{ServiceConfig, ServiceKind};
pub use error::{ApiError, ErrorBody, ERROR_CODES};
pub use handlers::{
    auth_router, catalog_router, log_router, resource_router, AuthState, CatalogEntry,
    CatalogState, Common, Entrypoints, LogState, ParamEntry, ResourceState, TokenResponse,
};
pub use sink::{AuditSink, HttpSink, LocalSink};

#[derive(Debug, Error)]
pub enum StartError {
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error("rbac: {0}")]
    Rbac(#[from] medshare_core::rbac::RbacError),
    #[error("signing key: {0}")]
    Key(#[from] medshare_core::token::KeyError),
    #[error("dataset: {0}")]
    Store(#[from] medshare_core::store::StoreError),
    #[error("audit log: {0}")]
    Audit(#[from] medshare_core::audit::AuditError),
    #[error("http client: {0}")]
    Client(String),
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
}

fn required<'a, T>(value: &'a Option<T>, name: &str) -> Result<&'a T, StartError> {
    value
        .as_ref()
        .ok_or_else(|| config::ConfigError::Invalid(format!("missing {name}")).into())
}

fn client() -> Result<reqwest::Client, StartError> {
    reqwest::Client::builder()
        .connect_timeout(Duration::from_secs(2))
        .build()
        .map_err(|e| StartError::Client(e.to_string()))
}

fn log_peer(
    cfg: &ServiceConfig,
    client: &reqwest::Client,
    secret: &[u8],
) -> Result<Arc<dyn AuditSink>, StartError> {
    let url = cfg
        .peer(ServiceKind::Log)
        .ok_or_else(|| config::ConfigError::Invalid("missing peers.log".into()))?;
    Ok(Arc::new(HttpSink::new(client.clone(), url, secret)))
}

/// Load everything the configured service needs and build its router.
pub fn build_router(cfg: &ServiceConfig) -> Result<Router, StartError> {
    cfg.validate()?;
    let peer_secret = config::read_secret(required(&cfg.peer_secret_path, "peer_secret_path")?)?;
    if cfg.kind == ServiceKind::Log {
        let log = AuditLog::open(required(&cfg.log_path, "log_path")?)?;
        return Ok(log_router(LogState::new(log, peer_secret)));
    }
    let http = client()?;
    let sink = log_peer(cfg, &http, &peer_secret)?;
    let health_url = cfg.peer(ServiceKind::Log).map(|u| format!("{u}/healthz"));
    let rbac = Arc::new(RbacStore::load_or_default(required(
        &cfg.rbac_path,
        "rbac_path",
    )?)?);
    let secret = config::read_secret(required(&cfg.signing_secret_path, "signing_secret_path")?)?;
    let key = SigningKey::new(secret, cfg.key_id.clone())?;
    let registry = QueryRegistry::canonical(cfg.guard_config()?);
    let common = handlers::Common {
        kind: cfg.kind,
        sink,
        http,
        health_url,
    };
    let router = match cfg.kind {
        ServiceKind::Auth => auth_router(AuthState {
            common,
            rbac,
            key,
            ttl_secs: cfg.token_ttl_seconds,
        }),
        ServiceKind::Catalog => {
            let peer = |k| cfg.peer(k).unwrap_or_default().to_string();
            catalog_router(CatalogState {
                common,
                rbac,
                key,
                registry,
                auth_url: peer(ServiceKind::Auth),
                health_record_url: peer(ServiceKind::HealthRecord),
                medical_record_url: peer(ServiceKind::MedicalRecord),
            })
        }
        ServiceKind::HealthRecord | ServiceKind::MedicalRecord => {
            let service = if cfg.kind == ServiceKind::HealthRecord {
                ResourceService::HealthRecord
            } else {
                ResourceService::MedicalRecord
            };
            let tables = Arc::new(load_tables(required(&cfg.data_dir, "data_dir")?)?);
            let engine = EngineConfig {
                reference_date: cfg.reference_date,
            };
            let gateway = Gateway::new(registry.for_service(service), rbac, tables, engine);
            resource_router(ResourceState {
                common,
                key,
                gateway: Arc::new(gateway),
            })
        }
        ServiceKind::Log => unreachable!(),
    };
    Ok(router)
}

/// Serve until ctrl-c.
pub async fn serve(cfg: ServiceConfig) -> Result<(), StartError> {
    let router = build_router(&cfg)?;
    let listener = tokio::net::TcpListener::bind(&cfg.listen_address)
        .await
        .map_err(|source| StartError::Bind {
            addr: cfg.listen_address.clone(),
            source,
        })?;
    tracing::info!(kind = %cfg.kind, addr = %cfg.listen_address, "listening");
    axum::serve(listener, router)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|source| StartError::Bind {
            addr: cfg.listen_address.clone(),
            source,
        })
}
