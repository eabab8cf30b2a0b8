//! The authorised query path shared by the HTTP resource services and the
//! offline CLI: registry lookup, permission check, guarded binding,
//! evaluation and serialization, in that order.

use std::sync::Arc;

use thiserror::Error;

use crate::query::{execute, BindError, EngineConfig, QueryRegistry};
use crate::rbac::RbacStore;
use crate::resultfmt::{self, FormatError, WireFormat};
use crate::store::ClinicalTables;

/// Query-string key selecting the wire format. Never bound as a parameter.
pub const FORMAT_PARAM: &str = "format";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GatewayError {
    #[error("unknown query {0}")]
    UnknownQuery(String),
    #[error("query {0} is not granted to the caller's roles")]
    QueryDenied(String),
    #[error(transparent)]
    Bind(BindError),
    #[error("format must be json or xml")]
    BadFormat,
    #[error("result could not be serialized: {0}")]
    Serialize(String),
}

impl GatewayError {
    pub fn code(&self) -> &'static str {
        match self {
            GatewayError::UnknownQuery(_) => "unknown_query",
            GatewayError::QueryDenied(_) => "query_denied",
            GatewayError::Bind(e) => e.code(),
            GatewayError::BadFormat => "bad_param_format",
            GatewayError::Serialize(_) => "internal",
        }
    }

    /// Offending parameter name, when there is one. Never a value.
    pub fn param(&self) -> Option<&str> {
        match self {
            GatewayError::Bind(e) => e.param(),
            GatewayError::BadFormat => Some(FORMAT_PARAM),
            _ => None,
        }
    }
}

impl From<FormatError> for GatewayError {
    fn from(e: FormatError) -> Self {
        GatewayError::Serialize(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryResponse {
    pub body: Vec<u8>,
    pub format: WireFormat,
    /// Audit-safe description of what ran.
    pub audit_detail: String,
}

/// Immutable snapshot of everything a resource service needs.
#[derive(Debug, Clone)]
pub struct Gateway {
    registry: QueryRegistry,
    rbac: Arc<RbacStore>,
    tables: Arc<ClinicalTables>,
    engine: EngineConfig,
}

impl Gateway {
    pub fn new(
        registry: QueryRegistry,
        rbac: Arc<RbacStore>,
        tables: Arc<ClinicalTables>,
        engine: EngineConfig,
    ) -> Self {
        Self {
            registry,
            rbac,
            tables,
            engine,
        }
    }

    pub fn registry(&self) -> &QueryRegistry {
        &self.registry
    }

    pub fn rbac(&self) -> &RbacStore {
        &self.rbac
    }

    pub fn tables(&self) -> &ClinicalTables {
        &self.tables
    }

    pub fn run<R, K, V>(
        &self,
        roles: &[R],
        query_id: &str,
        raw_params: &[(K, V)],
    ) -> Result<QueryResponse, GatewayError>
    where
        R: AsRef<str>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        if !self.registry.contains(query_id) {
            return Err(GatewayError::UnknownQuery(query_id.to_string()));
        }
        if !self.rbac.check_permission(roles, query_id) {
            return Err(GatewayError::QueryDenied(query_id.to_string()));
        }
        let mut format_values = Vec::new();
        let mut params = Vec::with_capacity(raw_params.len());
        for (k, v) in raw_params {
            if k.as_ref() == FORMAT_PARAM {
                format_values.push(v.as_ref());
            } else {
                params.push((k.as_ref(), v.as_ref()));
            }
        }
        let bound = self
            .registry
            .bind(query_id, &params)
            .map_err(GatewayError::Bind)?;
        let format = match format_values.as_slice() {
            [] => WireFormat::default(),
            [one] => one.parse().map_err(|_| GatewayError::BadFormat)?,
            _ => return Err(GatewayError::BadFormat),
        };
        let result = execute(&bound, &self.tables, &self.engine);
        let body = resultfmt::render(&result, format, self.registry.guard())?;
        Ok(QueryResponse {
            body,
            format,
            audit_detail: bound.audit_detail(),
        })
    }
}
