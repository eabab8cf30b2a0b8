use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use subtle::ConstantTimeEq;

use medshare_core::audit::{AuditAction, AuditError, AuditEvent, AuditLog, Outcome, ANONYMOUS};
use medshare_core::token::{
    issue_token, peek_claims, verify_token, Claims, IssueError, SigningKey, TokenError,
};
use medshare_core::{Gateway, GatewayError, QueryRegistry, RbacStore};

use crate::config::ServiceKind;
use crate::error::ApiError;
use crate::sink::{Appended, AuditSink, PEER_SECRET_HEADER};

const MAX_PRINCIPAL_LEN: usize = 64;

/// Pieces shared by every service that reports to the log service.
#[derive(Clone)]
pub struct Common {
    pub kind: ServiceKind,
    pub sink: Arc<dyn AuditSink>,
    pub http: reqwest::Client,
    pub health_url: Option<String>,
}

impl Common {
    pub fn new(kind: ServiceKind, sink: Arc<dyn AuditSink>) -> Self {
        Self {
            kind,
            sink,
            http: reqwest::Client::new(),
            health_url: None,
        }
    }

    async fn audit(&self, event: AuditEvent) -> Result<(), ApiError> {
        match self.sink.record(event).await {
            Ok(_) => Ok(()),
            Err(e) => {
                tracing::warn!(kind = %self.kind, error = %e, "audit append failed");
                Err(ApiError::audit_unavailable())
            }
        }
    }

    /// Audit `err` and return it, unless auditing itself fails.
    async fn reject(&self, event: AuditEvent, err: ApiError) -> ApiError {
        match self.audit(event).await {
            Ok(()) => err,
            Err(audit_err) => audit_err,
        }
    }

    async fn healthz(&self) -> Response {
        if let Some(url) = &self.health_url {
            let up = self
                .http
                .get(url)
                .timeout(Duration::from_secs(2))
                .send()
                .await
                .is_ok_and(|r| r.status().is_success());
            if !up {
                return ApiError::new(
                    StatusCode::SERVICE_UNAVAILABLE,
                    "dependency_unavailable",
                    "log service unreachable",
                )
                .into_response();
            }
        }
        health_ok(self.kind)
    }

    /// Verify the bearer token, auditing a rejection.
    async fn authorize(&self, headers: &HeaderMap, key: &SigningKey) -> Result<Claims, ApiError> {
        let verified = bearer(headers).and_then(|t| verify_token(t, now_secs(), key));
        match verified {
            Ok(claims) => Ok(claims),
            Err(e) => {
                let event = AuditEvent::new(
                    ANONYMOUS,
                    "",
                    AuditAction::TokenRejected,
                    e.code(),
                    Outcome::Error,
                );
                Err(self.reject(event, e.into()).await)
            }
        }
    }
}

#[derive(Serialize)]
struct Health {
    status: &'static str,
    service_kind: ServiceKind,
}

fn health_ok(kind: ServiceKind) -> Response {
    Json(Health {
        status: "ok",
        service_kind: kind,
    })
    .into_response()
}

fn now_secs() -> i64 {
    chrono::Utc::now().timestamp()
}

fn bearer(headers: &HeaderMap) -> Result<&str, TokenError> {
    headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .map(str::trim)
        .ok_or(TokenError::Malformed)
}

fn clip(s: &str) -> String {
    s.chars()
        .filter(|c| !c.is_control())
        .take(MAX_PRINCIPAL_LEN)
        .collect()
}

// auth

pub struct AuthState {
    pub common: Common,
    pub rbac: Arc<RbacStore>,
    pub key: SigningKey,
    pub ttl_secs: i64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TokenRequest {
    username: String,
    password: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TokenResponse {
    pub token: String,
    pub expires_at: i64,
}

pub fn auth_router(state: AuthState) -> Router {
    Router::new()
        .route("/auth/token", post(issue))
        .route(
            "/healthz",
            get(|State(s): State<Arc<AuthState>>| async move { s.common.healthz().await }),
        )
        .with_state(Arc::new(state))
}

async fn issue(
    State(s): State<Arc<AuthState>>,
    body: Bytes,
) -> Result<Json<TokenResponse>, ApiError> {
    let req: TokenRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(_) => {
            let event = AuditEvent::new(
                ANONYMOUS,
                "",
                AuditAction::AuthFailure,
                "malformed_body",
                Outcome::Error,
            );
            return Err(s
                .common
                .reject(
                    event,
                    ApiError::malformed_body("expected {username, password}"),
                )
                .await);
        }
    };
    let principal = clip(&req.username);
    let worker = s.clone();
    let issued = tokio::task::spawn_blocking(move || {
        issue_token(
            &req.username,
            &req.password,
            now_secs(),
            worker.ttl_secs,
            &worker.key,
            &worker.rbac,
        )
    })
    .await
    .map_err(|_| ApiError::internal())?;
    match issued {
        Ok(token) => {
            let claims = peek_claims(&token).ok_or_else(ApiError::internal)?;
            let event = AuditEvent::new(
                &principal,
                &claims.jti,
                AuditAction::AuthSuccess,
                "",
                Outcome::Ok,
            );
            s.common.audit(event).await?;
            Ok(Json(TokenResponse {
                token,
                expires_at: claims.exp,
            }))
        }
        Err(IssueError::Auth(_)) => {
            let event = AuditEvent::new(
                &principal,
                "",
                AuditAction::AuthFailure,
                "bad_credentials",
                Outcome::Error,
            );
            Err(s.common.reject(event, ApiError::bad_credentials()).await)
        }
        Err(IssueError::BadTtl) => Err(ApiError::internal()),
    }
}

// catalog

pub struct CatalogState {
    pub common: Common,
    pub rbac: Arc<RbacStore>,
    pub key: SigningKey,
    pub registry: QueryRegistry,
    pub auth_url: String,
    pub health_record_url: String,
    pub medical_record_url: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entrypoints {
    pub auth_token_url: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub kind: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub query_id: String,
    pub description: String,
    pub params: Vec<ParamEntry>,
    pub url_path: String,
    pub service_url: String,
}

pub fn catalog_router(state: CatalogState) -> Router {
    Router::new()
        .route("/catalog/entrypoints", get(entrypoints))
        .route("/catalog/queries", get(catalog))
        .route(
            "/healthz",
            get(|State(s): State<Arc<CatalogState>>| async move { s.common.healthz().await }),
        )
        .with_state(Arc::new(state))
}

async fn entrypoints(State(s): State<Arc<CatalogState>>) -> Json<Entrypoints> {
    Json(Entrypoints {
        auth_token_url: format!("{}/auth/token", s.auth_url),
    })
}

async fn catalog(
    State(s): State<Arc<CatalogState>>,
    headers: HeaderMap,
) -> Result<Json<Vec<CatalogEntry>>, ApiError> {
    use medshare_core::query::ResourceService;
    let claims = s.common.authorize(&headers, &s.key).await?;
    let permitted = s.rbac.permitted_queries(&claims.roles);
    let entries: Vec<CatalogEntry> = s
        .registry
        .definitions()
        .filter(|d| permitted.contains(&d.query_id))
        .map(|d| CatalogEntry {
            query_id: d.query_id.clone(),
            description: d.description.clone(),
            params: d
                .params
                .iter()
                .map(|p| ParamEntry {
                    name: p.name.clone(),
                    kind: p.kind.as_str().to_string(),
                })
                .collect(),
            url_path: d.url_path(),
            service_url: match d.service {
                ResourceService::HealthRecord => s.health_record_url.clone(),
                ResourceService::MedicalRecord => s.medical_record_url.clone(),
            },
        })
        .collect();
    let detail = format!("{} queries", entries.len());
    let event = AuditEvent::new(
        &claims.sub,
        &claims.jti,
        AuditAction::CatalogView,
        detail,
        Outcome::Ok,
    );
    s.common.audit(event).await?;
    Ok(Json(entries))
}

// health_record and medical_record

pub struct ResourceState {
    pub common: Common,
    pub key: SigningKey,
    pub gateway: Arc<Gateway>,
}

pub fn resource_router(state: ResourceState) -> Router {
    Router::new()
        .route("/query/{query_id}", get(run_query))
        .route(
            "/healthz",
            get(|State(s): State<Arc<ResourceState>>| async move { s.common.healthz().await }),
        )
        .with_state(Arc::new(state))
}

fn failure_detail(gateway: &Gateway, query_id: &str, err: &GatewayError) -> String {
    let Some(def) = gateway.registry().get(query_id) else {
        return err.code().to_string();
    };
    let declared = err
        .param()
        .filter(|p| *p == medshare_core::gateway::FORMAT_PARAM || def.param(p).is_some());
    match declared {
        Some(p) => format!("{query_id} {} param={p}", err.code()),
        None => format!("{query_id} {}", err.code()),
    }
}

async fn run_query(
    State(s): State<Arc<ResourceState>>,
    Path(query_id): Path<String>,
    params: Result<Query<Vec<(String, String)>>, QueryRejection>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let claims = s.common.authorize(&headers, &s.key).await?;
    let params = match params {
        Ok(Query(p)) => p,
        Err(_) => {
            let event = AuditEvent::new(
                &claims.sub,
                &claims.jti,
                AuditAction::QueryExecute,
                "bad_param_format",
                Outcome::Error,
            );
            let err = ApiError::new(
                StatusCode::BAD_REQUEST,
                "bad_param_format",
                "query string is not decodable",
            );
            return Err(s.common.reject(event, err).await);
        }
    };
    let gateway = s.gateway.clone();
    let roles = claims.roles.clone();
    let id = query_id.clone();
    let outcome = tokio::task::spawn_blocking(move || gateway.run(&roles, &id, &params))
        .await
        .map_err(|_| ApiError::internal())?;
    match outcome {
        Ok(resp) => {
            let event = AuditEvent::new(
                &claims.sub,
                &claims.jti,
                AuditAction::QueryExecute,
                resp.audit_detail,
                Outcome::Ok,
            );
            s.common.audit(event).await?;
            Ok((
                [(header::CONTENT_TYPE, resp.format.content_type())],
                resp.body,
            )
                .into_response())
        }
        Err(err) => {
            let action = match &err {
                GatewayError::UnknownQuery(_) | GatewayError::QueryDenied(_) => {
                    AuditAction::QueryDenied
                }
                GatewayError::Bind(medshare_core::query::BindError::BlockedInput { .. }) => {
                    AuditAction::InputBlocked
                }
                _ => AuditAction::QueryExecute,
            };
            let detail = failure_detail(&s.gateway, &query_id, &err);
            let event = AuditEvent::new(&claims.sub, &claims.jti, action, detail, Outcome::Error);
            Err(s.common.reject(event, ApiError::from(&err)).await)
        }
    }
}

// log

pub struct LogState {
    log: Mutex<AuditLog>,
    peer_secret: Vec<u8>,
}

impl LogState {
    pub fn new(log: AuditLog, peer_secret: Vec<u8>) -> Self {
        Self {
            log: Mutex::new(log),
            peer_secret,
        }
    }
}

pub fn log_router(state: LogState) -> Router {
    Router::new()
        .route("/log/entries", post(append))
        .route("/healthz", get(log_health))
        .with_state(Arc::new(state))
}

async fn append(
    State(s): State<Arc<LogState>>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Json<Appended>, ApiError> {
    let offered = headers
        .get(PEER_SECRET_HEADER)
        .map(|v| v.as_bytes())
        .unwrap_or_default();
    if !bool::from(offered.ct_eq(&s.peer_secret)) {
        return Err(ApiError::new(
            StatusCode::UNAUTHORIZED,
            "bad_peer_secret",
            "bad peer secret",
        ));
    }
    let event: AuditEvent = serde_json::from_slice(&body)
        .map_err(|_| ApiError::malformed_body("expected an audit event"))?;
    let mut log = s.log.lock().unwrap_or_else(|p| p.into_inner());
    match log.append(event, chrono::Utc::now().timestamp_millis()) {
        Ok(entry) => Ok(Json(Appended { seq: entry.seq })),
        Err(AuditError::IoFailure { .. }) | Err(AuditError::CorruptTail { .. }) => {
            Err(ApiError::new(
                StatusCode::SERVICE_UNAVAILABLE,
                "log_unavailable",
                "audit log is not writable",
            ))
        }
    }
}

async fn log_health(State(s): State<Arc<LogState>>) -> Response {
    let log = s.log.lock().unwrap_or_else(|p| p.into_inner());
    let dir_ok = log
        .path()
        .parent()
        .map_or(true, |d| d.as_os_str().is_empty() || d.is_dir());
    drop(log);
    if dir_ok {
        health_ok(ServiceKind::Log)
    } else {
        ApiError::new(
            StatusCode::SERVICE_UNAVAILABLE,
            "log_unavailable",
            "audit log directory missing",
        )
        .into_response()
    }
}
