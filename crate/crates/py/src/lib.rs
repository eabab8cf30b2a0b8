//! Python bindings: dataset generation and loading, local query execution,
//! input guards, tokens, role grants and the audit chain.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use chrono::NaiveDate;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

use medshare_core::audit::{self, AuditAction, AuditEvent, ChainStatus, Outcome};
use medshare_core::query::EngineConfig;
use medshare_core::store::{self, ClinicalTables};
use medshare_core::synth::{self, GenSpec};
use medshare_core::token::{self as tok, SigningKey};
use medshare_core::{Gateway, GuardConfig as CoreGuard, QueryRegistry, RbacStore};

create_exception!(medshare, MedshareError, PyException);

/// Raise `MedshareError(code, message)`.
fn fail(code: &str, message: impl ToString) -> PyErr {
    MedshareError::new_err((code.to_string(), message.to_string()))
}

fn parse_date(raw: &str) -> PyResult<NaiveDate> {
    medshare_core::query::parse_iso_date(raw)
        .ok_or_else(|| PyValueError::new_err(format!("expected YYYY-MM-DD, got {raw:?}")))
}

#[pyclass(module = "medshare", frozen)]
struct Dataset {
    tables: Arc<ClinicalTables>,
}

#[pymethods]
impl Dataset {
    /// Generate the synthetic dataset. Row counts default to the standard sizes.
    #[staticmethod]
    #[pyo3(signature = (seed=42, rows=None))]
    fn generate(seed: u64, rows: Option<BTreeMap<String, usize>>) -> PyResult<Self> {
        let mut spec = GenSpec::with_seed(seed);
        for (table, n) in rows.unwrap_or_default() {
            let slot = match table.as_str() {
                "patient" => &mut spec.rows_patient,
                "examination" => &mut spec.rows_examination,
                "clinicaldetection" => &mut spec.rows_clinicaldetection,
                "doctor" => &mut spec.rows_doctor,
                "prescription" => &mut spec.rows_prescription,
                "medication" => &mut spec.rows_medication,
                "prescriptmed" => &mut spec.rows_prescriptmed,
                other => return Err(PyValueError::new_err(format!("unknown table {other}"))),
            };
            *slot = n;
        }
        let tables = synth::generate_dataset(&spec).map_err(|e| match e {
            synth::GenError::InconsistentSpec(m) => fail("inconsistent_spec", m),
            other => fail("internal", other),
        })?;
        Ok(Self {
            tables: Arc::new(tables),
        })
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        let tables = store::load_tables(&path).map_err(|e| fail("bad_dataset", e))?;
        Ok(Self {
            tables: Arc::new(tables),
        })
    }

    fn save(&self, path: std::path::PathBuf) -> PyResult<()> {
        store::save_tables(&self.tables, &path).map_err(|e| fail("io_failure", e))
    }

    fn row_counts(&self) -> BTreeMap<&'static str, usize> {
        let names = [
            "patient",
            "examination",
            "clinicaldetection",
            "doctor",
            "prescription",
            "medication",
            "prescriptmed",
        ];
        names.into_iter().zip(self.tables.row_counts()).collect()
    }

    /// Run a query as `role` and return the serialized result.
    #[allow(clippy::too_many_arguments)]
    #[pyo3(signature = (query_id, params=None, role="administrator", format="json", reference_date="2018-01-01", rbac=None))]
    fn query(
        &self,
        py: Python<'_>,
        query_id: &str,
        params: Option<BTreeMap<String, String>>,
        role: &str,
        format: &str,
        reference_date: &str,
        rbac: Option<&Rbac>,
    ) -> PyResult<String> {
        let engine = EngineConfig {
            reference_date: parse_date(reference_date)?,
        };
        let store = rbac
            .map(|r| r.store.clone())
            .unwrap_or_else(RbacStore::default_fixture);
        let gateway = Gateway::new(
            QueryRegistry::canonical(CoreGuard::default()),
            Arc::new(store),
            self.tables.clone(),
            engine,
        );
        let mut raw: Vec<(String, String)> = params.unwrap_or_default().into_iter().collect();
        raw.push((medshare_core::gateway::FORMAT_PARAM.into(), format.into()));
        let resp = py
            .detach(|| gateway.run(&[role], query_id, &raw))
            .map_err(|e| fail(e.code(), e))?;
        String::from_utf8(resp.body).map_err(|e| fail("internal", e))
    }

    fn __repr__(&self) -> String {
        format!("Dataset(patients={})", self.tables.patients().len())
    }
}

/// Canonical query descriptors as dictionaries.
#[pyfunction]
fn canonical_queries() -> Vec<BTreeMap<&'static str, String>> {
    QueryRegistry::canonical(CoreGuard::default())
        .definitions()
        .map(|d| {
            let params: Vec<String> = d
                .params
                .iter()
                .map(|p| format!("{}:{}", p.name, p.kind.as_str()))
                .collect();
            BTreeMap::from([
                ("query_id", d.query_id.clone()),
                ("description", d.description.clone()),
                ("params", params.join(",")),
                ("output_columns", d.output_columns.join(",")),
                ("url_path", d.url_path()),
            ])
        })
        .collect()
}

#[pyclass(module = "medshare", frozen)]
struct Guard {
    inner: CoreGuard,
}

#[pymethods]
impl Guard {
    #[new]
    #[pyo3(signature = (blocklist=None, anti_injection=None))]
    fn new(blocklist: Option<Vec<String>>, anti_injection: Option<Vec<String>>) -> PyResult<Self> {
        let default = CoreGuard::default();
        let blocklist =
            blocklist.unwrap_or_else(|| default.blocklist().map(str::to_string).collect());
        let anti = anti_injection
            .unwrap_or_else(|| default.anti_injection().map(str::to_string).collect());
        let inner =
            CoreGuard::new(blocklist, anti).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Self { inner })
    }

    /// `None` when accepted, otherwise "deidentification" or "injection".
    fn screen(&self, value: &str) -> Option<&'static str> {
        self.inner.screen(value).map(|r| r.as_str())
    }

    fn accepts(&self, value: &str) -> bool {
        self.inner.accepts(value)
    }
}

#[pyclass(module = "medshare")]
struct Rbac {
    store: RbacStore,
}

#[pymethods]
impl Rbac {
    /// The built-in roles and grants, with no users.
    #[new]
    fn new() -> Self {
        Self {
            store: RbacStore::default_fixture(),
        }
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        let store = RbacStore::load_or_default(&path).map_err(|e| fail(e.code(), e))?;
        Ok(Self { store })
    }

    fn save(&self, path: std::path::PathBuf) -> PyResult<()> {
        self.store.save(&path).map_err(|e| fail(e.code(), e))
    }

    fn set_digest_iterations(&mut self, iterations: u32) {
        self.store.set_digest_iterations(iterations);
    }

    fn create_user(&mut self, username: &str, password: &str, roles: Vec<String>) -> PyResult<()> {
        let roles: BTreeSet<String> = roles.into_iter().collect();
        self.store
            .create_user(username, password, &roles)
            .map(|_| ())
            .map_err(|e| fail(e.code(), e))
    }

    fn grant(&mut self, role: &str, query_id: &str) -> PyResult<()> {
        self.store
            .grant(role, query_id)
            .map_err(|e| fail(e.code(), e))
    }

    fn revoke(&mut self, role: &str, query_id: &str) -> PyResult<()> {
        self.store
            .revoke(role, query_id)
            .map_err(|e| fail(e.code(), e))
    }

    fn permitted_queries(&self, roles: Vec<String>) -> Vec<String> {
        self.store.permitted_queries(&roles).into_iter().collect()
    }
}

#[pyfunction]
#[pyo3(signature = (rbac, username, password, now, secret, ttl=900, key_id="default"))]
fn issue_token(
    rbac: &Rbac,
    username: &str,
    password: &str,
    now: i64,
    secret: &[u8],
    ttl: i64,
    key_id: &str,
) -> PyResult<String> {
    let key = SigningKey::new(secret, key_id).map_err(|e| PyValueError::new_err(e.to_string()))?;
    tok::issue_token(username, password, now, ttl, &key, &rbac.store).map_err(|e| match e {
        tok::IssueError::Auth(_) => fail("bad_credentials", "bad credentials"),
        tok::IssueError::BadTtl => PyValueError::new_err("ttl must be positive"),
    })
}

/// Verified claims as a dict with sub, roles, iat, exp and jti.
#[pyfunction]
#[pyo3(signature = (token, now, secret, key_id="default"))]
fn verify_token<'py>(
    py: Python<'py>,
    token: &str,
    now: i64,
    secret: &[u8],
    key_id: &str,
) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    use pyo3::types::PyDictMethods;
    let key = SigningKey::new(secret, key_id).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let claims = tok::verify_token(token, now, &key).map_err(|e| fail(e.code(), e))?;
    let d = pyo3::types::PyDict::new(py);
    d.set_item("sub", claims.sub)?;
    d.set_item("roles", claims.roles)?;
    d.set_item("iat", claims.iat)?;
    d.set_item("exp", claims.exp)?;
    d.set_item("jti", claims.jti)?;
    Ok(d)
}

#[pyclass(module = "medshare")]
struct AuditLog {
    inner: audit::AuditLog,
}

fn parse_action(raw: &str) -> PyResult<AuditAction> {
    use AuditAction::*;
    [
        AuthSuccess,
        AuthFailure,
        CatalogView,
        QueryExecute,
        QueryDenied,
        InputBlocked,
        TokenRejected,
    ]
    .into_iter()
    .find(|a| a.as_str() == raw)
    .ok_or_else(|| PyValueError::new_err(format!("unknown action {raw}")))
}

#[pymethods]
impl AuditLog {
    #[new]
    fn open(path: std::path::PathBuf) -> PyResult<Self> {
        let inner = audit::AuditLog::open(&path).map_err(|e| fail("audit_unavailable", e))?;
        Ok(Self { inner })
    }

    /// Append one event and return its sequence number.
    #[pyo3(signature = (principal, action, timestamp_ms, detail="", jti="", ok=true))]
    fn append(
        &mut self,
        principal: &str,
        action: &str,
        timestamp_ms: i64,
        detail: &str,
        jti: &str,
        ok: bool,
    ) -> PyResult<u64> {
        let outcome = if ok { Outcome::Ok } else { Outcome::Error };
        let event = AuditEvent::new(principal, jti, parse_action(action)?, detail, outcome);
        self.inner
            .append(event, timestamp_ms)
            .map(|e| e.seq)
            .map_err(|e| fail("audit_unavailable", e))
    }
}

/// `None` for an intact chain, otherwise the first broken sequence number.
#[pyfunction]
fn verify_chain(path: std::path::PathBuf) -> PyResult<Option<u64>> {
    match audit::verify_chain(&path).map_err(|e| fail("io_failure", e))? {
        ChainStatus::Intact { .. } => Ok(None),
        ChainStatus::Broken { seq } => Ok(Some(seq)),
    }
}

#[pymodule]
fn medshare(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("MedshareError", m.py().get_type::<MedshareError>())?;
    m.add_class::<Dataset>()?;
    m.add_class::<Guard>()?;
    m.add_class::<Rbac>()?;
    m.add_class::<AuditLog>()?;
    m.add_function(wrap_pyfunction!(canonical_queries, m)?)?;
    m.add_function(wrap_pyfunction!(issue_token, m)?)?;
    m.add_function(wrap_pyfunction!(verify_token, m)?)?;
    m.add_function(wrap_pyfunction!(verify_chain, m)?)?;
    Ok(())
}
