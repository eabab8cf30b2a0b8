use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

use medshare_core::token::TokenError;
use medshare_core::GatewayError;

/// Every machine-readable error code a service can return.
pub const ERROR_CODES: [&str; 15] = [
    "bad_credentials",
    "malformed_body",
    "malformed_token",
    "bad_signature",
    "expired_token",
    "query_denied",
    "unknown_query",
    "missing_param",
    "bad_param_format",
    "input_blocked",
    "bad_peer_secret",
    "log_unavailable",
    "audit_unavailable",
    "dependency_unavailable",
    "internal",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub param: Option<String>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        debug_assert!(ERROR_CODES.contains(&code));
        Self {
            status,
            code,
            message: message.into(),
            param: None,
        }
    }

    pub fn bad_credentials() -> Self {
        Self::new(
            StatusCode::UNAUTHORIZED,
            "bad_credentials",
            "bad credentials",
        )
    }

    pub fn malformed_body(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "malformed_body", message)
    }

    pub fn audit_unavailable() -> Self {
        Self::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            "audit_unavailable",
            "request could not be audited",
        )
    }

    pub fn internal() -> Self {
        Self::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            "internal",
            "internal error",
        )
    }
}

impl From<TokenError> for ApiError {
    fn from(e: TokenError) -> Self {
        Self::new(StatusCode::UNAUTHORIZED, e.code(), e.to_string())
    }
}

impl From<&GatewayError> for ApiError {
    fn from(e: &GatewayError) -> Self {
        use medshare_core::query::BindError;
        let status = match e {
            GatewayError::UnknownQuery(_) => StatusCode::NOT_FOUND,
            GatewayError::QueryDenied(_) => StatusCode::FORBIDDEN,
            GatewayError::Bind(BindError::UnknownQuery(_)) => StatusCode::NOT_FOUND,
            GatewayError::Bind(BindError::BlockedInput { .. }) => StatusCode::UNPROCESSABLE_ENTITY,
            GatewayError::Bind(_) | GatewayError::BadFormat => StatusCode::BAD_REQUEST,
            GatewayError::Serialize(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let message = match e {
            GatewayError::Serialize(_) => "result could not be serialized".to_string(),
            other => other.to_string(),
        };
        Self {
            status,
            code: e.code(),
            message,
            param: e.param().map(str::to_string),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            code: self.code.to_string(),
            message: self.message,
            param: self.param,
        };
        (self.status, Json(body)).into_response()
    }
}
