//! Wire formats for result sets.
//!
//! XML is positional: a `<dataset>` of `<item>` rows, each holding one
//! `<element>` per value and no labels. JSON is labeled: an array of objects
//! keyed by column label in declared order, with integers as numbers.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::ser::{SerializeMap, SerializeSeq};
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::guard::{self, GuardConfig};
use crate::query::{ResultSet, Value};

pub const XML_DECLARATION: &str = r#"<?xml version="1.0" encoding="utf-8"?>"#;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum WireFormat {
    #[default]
    Json,
    Xml,
}

impl WireFormat {
    pub fn content_type(self) -> &'static str {
        match self {
            WireFormat::Json => "application/json",
            WireFormat::Xml => "application/xml",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            WireFormat::Json => "json",
            WireFormat::Xml => "xml",
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown wire format {0}")]
pub struct UnknownFormat(pub String);

impl FromStr for WireFormat {
    type Err = UnknownFormat;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(WireFormat::Json),
            "xml" => Ok(WireFormat::Xml),
            other => Err(UnknownFormat(other.to_string())),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("duplicate column label {0}")]
    DuplicateColumnLabel(String),
    #[error("column label {0} names an identifying attribute")]
    BlockedLabel(String),
}

fn escape_xml(s: &str, out: &mut String) {
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            c => out.push(c),
        }
    }
}

pub fn to_xml(rs: &ResultSet) -> Vec<u8> {
    let mut out = String::new();
    out.push_str(XML_DECLARATION);
    out.push_str("\n<dataset>\n");
    for row in rs.rows() {
        out.push_str("<item>\n");
        for value in row {
            out.push_str("<element>");
            match value {
                Value::Text(s) => escape_xml(s, &mut out),
                Value::Int(n) => write!(out, "{n}").expect("writing to a String"),
            }
            out.push_str("</element>\n");
        }
        out.push_str("</item>\n");
    }
    out.push_str("</dataset>\n");
    out.into_bytes()
}

struct LabeledRow<'a> {
    columns: &'a [String],
    values: &'a [Value],
}

impl Serialize for LabeledRow<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.columns.len()))?;
        for (label, value) in self.columns.iter().zip(self.values) {
            match value {
                Value::Text(s) => map.serialize_entry(label, s)?,
                Value::Int(n) => map.serialize_entry(label, n)?,
            }
        }
        map.end()
    }
}

struct LabeledRows<'a>(&'a ResultSet);

impl Serialize for LabeledRows<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let rs = self.0;
        let mut seq = serializer.serialize_seq(Some(rs.rows().len()))?;
        for values in rs.rows() {
            seq.serialize_element(&LabeledRow {
                columns: rs.columns(),
                values,
            })?;
        }
        seq.end()
    }
}

pub fn to_json(rs: &ResultSet) -> Result<Vec<u8>, FormatError> {
    let columns = rs.columns();
    for (i, label) in columns.iter().enumerate() {
        if columns[..i].contains(label) {
            return Err(FormatError::DuplicateColumnLabel(label.clone()));
        }
    }
    let mut out = serde_json::to_vec_pretty(&LabeledRows(rs)).expect("result rows serialize");
    out.push(b'\n');
    Ok(out)
}

/// Serialize after re-screening the column labels against the blocklist.
pub fn render(
    rs: &ResultSet,
    format: WireFormat,
    guard: &GuardConfig,
) -> Result<Vec<u8>, FormatError> {
    if let Some(label) = rs
        .columns()
        .iter()
        .find(|c| !guard::check_deidentification(c, guard))
    {
        return Err(FormatError::BlockedLabel(label.clone()));
    }
    match format {
        WireFormat::Json => to_json(rs),
        WireFormat::Xml => Ok(to_xml(rs)),
    }
}
