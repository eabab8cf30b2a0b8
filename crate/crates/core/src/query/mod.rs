//! Stored-query registry and evaluator.
//!
//! Only registered aggregate queries can run. A query is a typed plan over
//! [`ClinicalTables`]; parameters are screened by the input guards, parsed into
//! typed values and handed to the plan. No query text is ever built from user
//! input.

pub mod catalog;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::guard::{self, BlockReason, GuardConfig};
use crate::store::ClinicalTables;

pub use catalog::canonical_catalog;

/// Upper bound on a text parameter, in characters.
pub const MAX_TEXT_PARAM_CHARS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Date,
    CountryText,
    MedicationText,
    DoctorNameText,
    PositiveInt,
}

impl ParamKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ParamKind::Date => "date",
            ParamKind::CountryText => "country_text",
            ParamKind::MedicationText => "medication_text",
            ParamKind::DoctorNameText => "doctor_name_text",
            ParamKind::PositiveInt => "positive_int",
        }
    }

    /// Free-text kinds never have their values written to the audit trail.
    pub fn is_text(self) -> bool {
        matches!(
            self,
            ParamKind::CountryText | ParamKind::MedicationText | ParamKind::DoctorNameText
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub kind: ParamKind,
}

impl ParamSpec {
    pub fn new(name: &str, kind: ParamKind) -> Self {
        Self {
            name: name.to_string(),
            kind,
        }
    }
}

/// Which resource service answers a query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResourceService {
    HealthRecord,
    MedicalRecord,
}

/// One cell of a result row.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Text(String),
    Int(i64),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Text(s) => f.write_str(s),
            Value::Int(n) => write!(f, "{n}"),
        }
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_string())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Text(s)
    }
}

impl From<i64> for Value {
    fn from(n: i64) -> Self {
        Value::Int(n)
    }
}

impl From<usize> for Value {
    fn from(n: usize) -> Self {
        Value::Int(n as i64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResultSet {
    columns: Vec<String>,
    rows: Vec<Vec<Value>>,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("row {row} has {found} values but there are {expected} columns")]
pub struct RowWidthError {
    pub row: usize,
    pub found: usize,
    pub expected: usize,
}

impl ResultSet {
    pub fn new(columns: Vec<String>, rows: Vec<Vec<Value>>) -> Result<Self, RowWidthError> {
        for (i, row) in rows.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(RowWidthError {
                    row: i,
                    found: row.len(),
                    expected: columns.len(),
                });
            }
        }
        Ok(Self { columns, rows })
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Value>] {
        &self.rows
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BoundValue {
    Date(NaiveDate),
    Text(String),
    PositiveInt(u64),
}

/// Typed parameter values keyed by parameter name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Bindings(BTreeMap<String, BoundValue>);

impl Bindings {
    pub fn get(&self, name: &str) -> Option<&BoundValue> {
        self.0.get(name)
    }

    /// Plans only ask for parameters declared in their schema, which `bind`
    /// guarantees are present, so a miss is a registration bug.
    pub fn date(&self, name: &str) -> NaiveDate {
        match self.0.get(name) {
            Some(BoundValue::Date(d)) => *d,
            other => panic!("parameter {name} is not a bound date: {other:?}"),
        }
    }

    pub fn text(&self, name: &str) -> &str {
        match self.0.get(name) {
            Some(BoundValue::Text(s)) => s,
            other => panic!("parameter {name} is not bound text: {other:?}"),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &BoundValue)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Everything a plan may read.
pub struct PlanInput<'a> {
    pub tables: &'a ClinicalTables,
    pub bindings: &'a Bindings,
    pub reference_date: NaiveDate,
}

pub type PlanFn = dyn Fn(&PlanInput<'_>) -> Vec<Vec<Value>> + Send + Sync;

#[derive(Clone)]
pub struct QueryDefinition {
    pub query_id: String,
    pub description: String,
    pub params: Vec<ParamSpec>,
    pub output_columns: Vec<String>,
    pub service: ResourceService,
    pub plan: Arc<PlanFn>,
    pub aggregate_only: bool,
}

impl fmt::Debug for QueryDefinition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("QueryDefinition")
            .field("query_id", &self.query_id)
            .field("params", &self.params)
            .field("output_columns", &self.output_columns)
            .field("service", &self.service)
            .finish_non_exhaustive()
    }
}

impl QueryDefinition {
    pub fn param(&self, name: &str) -> Option<&ParamSpec> {
        self.params.iter().find(|p| p.name == name)
    }

    /// URL path under which a resource service answers this query.
    pub fn url_path(&self) -> String {
        format!("/query/{}", self.query_id)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RegistryError {
    #[error("query {0} is already registered")]
    DuplicateQueryId(String),
    #[error("output column {0} is blocked")]
    BlockedOutputColumn(String),
    #[error("description token {0} is blocked")]
    BlockedDescription(String),
    #[error("parameter {0} is declared twice")]
    DuplicateParam(String),
    #[error("column label {0} is declared twice")]
    DuplicateColumnLabel(String),
    #[error("query {0} is not aggregate-only")]
    NotAggregate(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BindError {
    #[error("unknown query {0}")]
    UnknownQuery(String),
    #[error("missing parameter {0}")]
    MissingParam(String),
    #[error("parameter {param} is not a valid {kind}")]
    BadParamFormat { param: String, kind: &'static str },
    #[error("unexpected parameter {0}")]
    UnexpectedParam(String),
    #[error("parameter {param} blocked by the {} check", reason.as_str())]
    BlockedInput { param: String, reason: BlockReason },
}

impl BindError {
    /// Machine-readable error code shared by every front end.
    pub fn code(&self) -> &'static str {
        match self {
            BindError::UnknownQuery(_) => "unknown_query",
            BindError::MissingParam(_) => "missing_param",
            BindError::BadParamFormat { .. } | BindError::UnexpectedParam(_) => "bad_param_format",
            BindError::BlockedInput { .. } => "input_blocked",
        }
    }

    pub fn param(&self) -> Option<&str> {
        match self {
            BindError::UnknownQuery(_) => None,
            BindError::MissingParam(p)
            | BindError::UnexpectedParam(p)
            | BindError::BadParamFormat { param: p, .. }
            | BindError::BlockedInput { param: p, .. } => Some(p),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BoundQuery {
    definition: QueryDefinition,
    bindings: Bindings,
}

impl BoundQuery {
    pub fn definition(&self) -> &QueryDefinition {
        &self.definition
    }

    pub fn bindings(&self) -> &Bindings {
        &self.bindings
    }

    /// Audit-safe rendering: query id, then every parameter name, with the
    /// value attached only for dates.
    pub fn audit_detail(&self) -> String {
        let mut out = self.definition.query_id.clone();
        for (name, value) in self.bindings.iter() {
            out.push(' ');
            out.push_str(name);
            if let BoundValue::Date(d) = value {
                out.push('=');
                out.push_str(&d.format("%Y-%m-%d").to_string());
            }
        }
        out
    }
}

/// Immutable set of registered queries plus the guard configuration used to
/// admit both queries and parameters.
#[derive(Debug, Clone)]
pub struct QueryRegistry {
    guard: GuardConfig,
    queries: BTreeMap<String, QueryDefinition>,
}

impl QueryRegistry {
    pub fn new(guard: GuardConfig) -> Self {
        Self {
            guard,
            queries: BTreeMap::new(),
        }
    }

    /// Registry holding the eight canonical queries.
    pub fn canonical(guard: GuardConfig) -> Self {
        let mut registry = Self::new(guard);
        for def in canonical_catalog() {
            registry
                .register_query(def)
                .expect("canonical queries pass registration");
        }
        registry
    }

    pub fn guard(&self) -> &GuardConfig {
        &self.guard
    }

    pub fn register_query(&mut self, def: QueryDefinition) -> Result<String, RegistryError> {
        if self.queries.contains_key(&def.query_id) {
            return Err(RegistryError::DuplicateQueryId(def.query_id));
        }
        if !def.aggregate_only {
            return Err(RegistryError::NotAggregate(def.query_id));
        }
        if let Some(label) = def
            .output_columns
            .iter()
            .find(|c| !guard::screen_output_schema(&[c.as_str()], &self.guard))
        {
            return Err(RegistryError::BlockedOutputColumn(label.clone()));
        }
        if let Some(token) = def
            .description
            .split_whitespace()
            .find(|t| !guard::check_deidentification(t, &self.guard))
        {
            return Err(RegistryError::BlockedDescription(token.to_string()));
        }
        for (i, p) in def.params.iter().enumerate() {
            if def.params[..i].iter().any(|q| q.name == p.name) {
                return Err(RegistryError::DuplicateParam(p.name.clone()));
            }
        }
        for (i, c) in def.output_columns.iter().enumerate() {
            if def.output_columns[..i].contains(c) {
                return Err(RegistryError::DuplicateColumnLabel(c.clone()));
            }
        }
        let id = def.query_id.clone();
        self.queries.insert(id.clone(), def);
        Ok(id)
    }

    pub fn get(&self, query_id: &str) -> Option<&QueryDefinition> {
        self.queries.get(query_id)
    }

    pub fn contains(&self, query_id: &str) -> bool {
        self.queries.contains_key(query_id)
    }

    /// Registered queries ordered by id.
    pub fn definitions(&self) -> impl Iterator<Item = &QueryDefinition> {
        self.queries.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.queries.keys().map(String::as_str)
    }

    /// Sub-registry of the queries a given resource service answers.
    pub fn for_service(&self, service: ResourceService) -> Self {
        Self {
            guard: self.guard.clone(),
            queries: self
                .queries
                .iter()
                .filter(|(_, d)| d.service == service)
                .map(|(k, d)| (k.clone(), d.clone()))
                .collect(),
        }
    }

    /// Screen, parse and type `raw` against the schema of `query_id`.
    ///
    /// Every value, and every key that is not a declared parameter name, is
    /// screened by both guards before anything else looks at it; only then
    /// are missing, unexpected and malformed parameters reported.
    pub fn bind<K, V>(&self, query_id: &str, raw: &[(K, V)]) -> Result<BoundQuery, BindError>
    where
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let def = self
            .queries
            .get(query_id)
            .ok_or_else(|| BindError::UnknownQuery(query_id.to_string()))?;

        for (key, value) in raw {
            let key = key.as_ref();
            // Declared names are whitelisted by exact match; anything else is
            // screened like a value.
            let screened_key = def.param(key).is_none().then_some(key);
            for s in screened_key.into_iter().chain([value.as_ref()]) {
                if let Some(reason) = self.guard.screen(s) {
                    return Err(BindError::BlockedInput {
                        param: key.to_string(),
                        reason,
                    });
                }
            }
        }

        let mut values: BTreeMap<&str, &str> = BTreeMap::new();
        for (key, value) in raw {
            let key = key.as_ref();
            if def.param(key).is_none() || values.insert(key, value.as_ref()).is_some() {
                return Err(BindError::UnexpectedParam(key.to_string()));
            }
        }

        let mut bound = BTreeMap::new();
        for spec in &def.params {
            let raw_value = values
                .get(spec.name.as_str())
                .ok_or_else(|| BindError::MissingParam(spec.name.clone()))?;
            let value = parse_param(spec, raw_value)?;
            bound.insert(spec.name.clone(), value);
        }
        Ok(BoundQuery {
            definition: def.clone(),
            bindings: Bindings(bound),
        })
    }
}

fn parse_param(spec: &ParamSpec, raw: &str) -> Result<BoundValue, BindError> {
    let bad = || BindError::BadParamFormat {
        param: spec.name.clone(),
        kind: spec.kind.as_str(),
    };
    match spec.kind {
        ParamKind::Date => parse_iso_date(raw).map(BoundValue::Date).ok_or_else(bad),
        ParamKind::PositiveInt => match raw.parse::<u64>() {
            Ok(n) if n > 0 && raw.bytes().all(|b| b.is_ascii_digit()) => {
                Ok(BoundValue::PositiveInt(n))
            }
            _ => Err(bad()),
        },
        ParamKind::CountryText | ParamKind::MedicationText | ParamKind::DoctorNameText => {
            let chars = raw.chars().count();
            if raw.trim().is_empty()
                || chars > MAX_TEXT_PARAM_CHARS
                || raw.chars().any(char::is_control)
            {
                Err(bad())
            } else {
                Ok(BoundValue::Text(raw.to_string()))
            }
        }
    }
}

/// Strict `YYYY-MM-DD`.
pub fn parse_iso_date(raw: &str) -> Option<NaiveDate> {
    let b = raw.as_bytes();
    let shape_ok = b.len() == 10
        && b[4] == b'-'
        && b[7] == b'-'
        && b.iter()
            .enumerate()
            .all(|(i, c)| i == 4 || i == 7 || c.is_ascii_digit());
    if !shape_ok {
        return None;
    }
    NaiveDate::parse_from_str(raw, "%Y-%m-%d").ok()
}

/// Evaluates bound queries against one immutable dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineConfig {
    /// Anchor for every age computation; never the wall clock.
    pub reference_date: NaiveDate,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            reference_date: crate::synth::DEFAULT_REFERENCE_DATE,
        }
    }
}

/// Run a bound query. The result depends only on the definition, the
/// bindings, the tables and the configured reference date.
pub fn execute(bound: &BoundQuery, tables: &ClinicalTables, config: &EngineConfig) -> ResultSet {
    let def = &bound.definition;
    let rows = (def.plan)(&PlanInput {
        tables,
        bindings: &bound.bindings,
        reference_date: config.reference_date,
    });
    ResultSet::new(def.output_columns.clone(), rows)
        .unwrap_or_else(|e| panic!("plan for {} broke its column contract: {e}", def.query_id))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn registry() -> QueryRegistry {
        QueryRegistry::canonical(GuardConfig::default())
    }

    fn plain_def(id: &str, columns: &[&str]) -> QueryDefinition {
        QueryDefinition {
            query_id: id.to_string(),
            description: "Count of examinations".to_string(),
            params: vec![],
            output_columns: columns.iter().map(|c| c.to_string()).collect(),
            service: ResourceService::HealthRecord,
            plan: Arc::new(|_| vec![]),
            aggregate_only: true,
        }
    }

    #[test]
    fn register_accepts_clean_columns() {
        let mut r = QueryRegistry::new(GuardConfig::default());
        assert_eq!(
            r.register_query(plain_def("q_custom", &["Country", "TotalNum"])),
            Ok("q_custom".to_string())
        );
    }

    #[test]
    fn register_rejects_blocked_columns_and_duplicates() {
        let mut r = registry();
        assert_eq!(
            r.register_query(plain_def("q_other", &["name", "count"])),
            Err(RegistryError::BlockedOutputColumn("name".into()))
        );
        assert_eq!(
            r.register_query(plain_def("q1_exam_by_country", &["Country", "TotalNum"])),
            Err(RegistryError::DuplicateQueryId("q1_exam_by_country".into()))
        );
        assert_eq!(
            r.register_query(plain_def("q_dup", &["A", "A"])),
            Err(RegistryError::DuplicateColumnLabel("A".into()))
        );
        let mut def = plain_def("q_age", &["Num"]);
        def.description = "Age profile".into();
        assert_eq!(
            r.register_query(def),
            Err(RegistryError::BlockedDescription("Age".into()))
        );
        let mut def = plain_def("q_rows", &["Num"]);
        def.aggregate_only = false;
        assert_eq!(
            r.register_query(def),
            Err(RegistryError::NotAggregate("q_rows".into()))
        );
    }

    #[test]
    fn bind_accepts_iso_window() {
        let bound = registry()
            .bind(
                "q1_exam_by_country",
                &[("start", "2010-01-01"), ("end", "2010-12-30")],
            )
            .unwrap();
        assert_eq!(bound.bindings().date("end"), "2010-12-30".parse().unwrap());
        assert_eq!(
            bound.audit_detail(),
            "q1_exam_by_country end=2010-12-30 start=2010-01-01"
        );
    }

    #[test]
    fn bind_blocks_injection_before_parsing() {
        let err = registry()
            .bind(
                "q1_exam_by_country",
                &[("start", "2010-01-01' OR '1'='1"), ("end", "2010-12-30")],
            )
            .unwrap_err();
        assert_eq!(
            err,
            BindError::BlockedInput {
                param: "start".into(),
                reason: BlockReason::Injection
            }
        );
        assert_eq!(err.code(), "input_blocked");
    }

    #[test]
    fn bind_blocks_identifier_tokens() {
        let err = registry()
            .bind(
                "q7_age_profile_medication",
                &[
                    ("medication", "patient name"),
                    ("start", "2017-01-01"),
                    ("end", "2017-12-31"),
                ],
            )
            .unwrap_err();
        assert_eq!(
            err,
            BindError::BlockedInput {
                param: "medication".into(),
                reason: BlockReason::Deidentification
            }
        );
    }

    #[test]
    fn bind_reports_schema_errors() {
        let r = registry();
        assert_eq!(
            r.bind::<&str, &str>("q9", &[]).unwrap_err(),
            BindError::UnknownQuery("q9".into())
        );
        assert_eq!(
            r.bind("q5_total_prescriptions", &[("start", "2017-01-01")])
                .unwrap_err(),
            BindError::MissingParam("end".into())
        );
        assert!(matches!(
            r.bind(
                "q5_total_prescriptions",
                &[("start", "2017-1-1"), ("end", "2017-12-31")]
            )
            .unwrap_err(),
            BindError::BadParamFormat { .. }
        ));
        assert!(matches!(
            r.bind(
                "q5_total_prescriptions",
                &[("start", "2017-02-30"), ("end", "2017-12-31")]
            )
            .unwrap_err(),
            BindError::BadParamFormat { .. }
        ));
        assert_eq!(
            r.bind("q4_hepb_susceptible_by_gender", &[("country", "Hungary")])
                .unwrap_err(),
            BindError::UnexpectedParam("country".into())
        );
        assert_eq!(
            r.bind(
                "q5_total_prescriptions",
                &[
                    ("start", "2017-01-01"),
                    ("start", "2017-01-02"),
                    ("end", "2017-12-31")
                ]
            )
            .unwrap_err(),
            BindError::UnexpectedParam("start".into())
        );
    }

    #[test]
    fn text_params_are_bounded() {
        let r = registry();
        let long = "x".repeat(MAX_TEXT_PARAM_CHARS + 1);
        for bad in ["", "   ", long.as_str(), "Tom\tBaker"] {
            assert!(matches!(
                r.bind(
                    "q6_patients_by_doctor",
                    &[
                        ("doctor_name", bad),
                        ("start", "2017-01-01"),
                        ("end", "2017-12-31")
                    ]
                ),
                Err(BindError::BadParamFormat { .. })
            ));
        }
    }

    #[test]
    fn audit_detail_omits_text_values() {
        let bound = registry()
            .bind(
                "q6_patients_by_doctor",
                &[
                    ("doctor_name", "Tom Baker"),
                    ("start", "2017-01-01"),
                    ("end", "2017-12-31"),
                ],
            )
            .unwrap();
        let detail = bound.audit_detail();
        assert!(!detail.contains("Tom"));
        assert!(detail.contains("doctor_name"));
    }

    #[test]
    fn positive_int_parsing() {
        let spec = ParamSpec::new("n", ParamKind::PositiveInt);
        assert_eq!(parse_param(&spec, "5"), Ok(BoundValue::PositiveInt(5)));
        for bad in ["0", "-1", "+3", "1.5", ""] {
            assert!(parse_param(&spec, bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn result_set_rejects_ragged_rows() {
        let err = ResultSet::new(vec!["A".into()], vec![vec![Value::Int(1), Value::Int(2)]]);
        assert!(err.is_err());
    }
}
