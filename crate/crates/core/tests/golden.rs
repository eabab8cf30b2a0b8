use std::path::Path;

use medshare_core::resultfmt::{to_json, to_xml};
use medshare_core::{ResultSet, Value};

fn golden(name: &str) -> Vec<u8> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name);
    std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn rs(columns: &[&str], rows: Vec<Vec<Value>>) -> ResultSet {
    ResultSet::new(columns.iter().map(|c| c.to_string()).collect(), rows).unwrap()
}

fn pairs(columns: &[&str], rows: &[(&str, i64)]) -> ResultSet {
    rs(
        columns,
        rows.iter()
            .map(|&(l, n)| vec![Value::from(l), Value::Int(n)])
            .collect(),
    )
}

fn assert_golden(result: &ResultSet, stem: &str) {
    assert_eq!(to_xml(result), golden(&format!("{stem}.xml")), "{stem}.xml");
    assert_eq!(
        to_json(result).unwrap(),
        golden(&format!("{stem}.json")),
        "{stem}.json"
    );
}

#[test]
fn hepb_by_gender() {
    assert_golden(
        &pairs(&["Gender", "NumberOfPatients"], &[("F", 184), ("M", 192)]),
        "hepb_by_gender",
    );
}

#[test]
fn top5_diagnoses() {
    let rows = [
        (
            "Colon: Primary malignant tumor, Quiescent Crohn's disease",
            421,
        ),
        ("Esophagus: Normal, Ectopic gastric mucosa", 414),
        ("Stomach: Ulcer, Erosive gastritis", 406),
        ("Esophagus: Reflux esophagitis", 394),
        ("Duodenum: Normal", 365),
    ];
    assert_golden(
        &pairs(&["DiagnosesText", "Number"], &rows),
        "top5_diagnoses",
    );
}

#[test]
fn age_profile() {
    let row = [12, 140, 233, 97].map(Value::Int).to_vec();
    assert_golden(
        &rs(
            &[
                "NumBelow18",
                "Num18ToBelow40",
                "Num40ToBelow60",
                "Num60AndAbove",
            ],
            vec![row],
        ),
        "age_profile",
    );
}

#[test]
fn empty() {
    assert_golden(&rs(&["Country", "TotalNum"], vec![]), "empty");
}

#[test]
fn escaped() {
    assert_golden(
        &pairs(
            &["DiagnosesText", "Number"],
            &[("Colon & rectum <unspecified>", 3)],
        ),
        "escaped",
    );
}
