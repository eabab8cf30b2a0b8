//! Brute-force reference evaluation of the canonical queries, plus shared
//! fixtures for the integration and acceptance tests.
//!
//! Nothing here reuses the engine's plans. Each query is a plain nested loop
//! over the raw tables so that disagreements point at the engine.

use chrono::{Datelike, NaiveDate};
use medshare_core::query::catalog::{Q1, Q2, Q3, Q4, Q5, Q6, Q7, Q8};
use medshare_core::{ClinicalTables, Value};
use rand::seq::SliceRandom;
use rand::Rng;

fn completed_years(dob: NaiveDate, on: NaiveDate) -> i64 {
    let mut years = on.year() as i64 - dob.year() as i64;
    if (on.month(), on.day()) < (dob.month(), dob.day()) {
        years -= 1;
    }
    years.max(0)
}

fn bracket(years: i64) -> usize {
    if years < 18 {
        0
    } else if years < 40 {
        1
    } else if years < 60 {
        2
    } else {
        3
    }
}

fn param<'a>(params: &'a [(String, String)], key: &str) -> &'a str {
    params
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .unwrap_or_else(|| panic!("oracle needs {key}"))
}

fn date(params: &[(String, String)], key: &str) -> NaiveDate {
    NaiveDate::parse_from_str(param(params, key), "%Y-%m-%d").unwrap()
}

fn within(d: NaiveDate, lo: NaiveDate, hi: NaiveDate) -> bool {
    d >= lo && d <= hi
}

fn push_unique(list: &mut Vec<i64>, pid: i64) {
    if !list.contains(&pid) {
        list.push(pid);
    }
}

/// Count descending, label ascending, zero counts dropped, optionally cut.
fn rank(mut groups: Vec<(String, i64)>, limit: Option<usize>) -> Vec<Vec<Value>> {
    groups.retain(|g| g.1 > 0);
    for i in 0..groups.len() {
        for j in i + 1..groups.len() {
            let swap = groups[j].1 > groups[i].1
                || (groups[j].1 == groups[i].1 && groups[j].0 < groups[i].0);
            if swap {
                groups.swap(i, j);
            }
        }
    }
    if let Some(n) = limit {
        groups.truncate(n);
    }
    groups
        .into_iter()
        .map(|(label, n)| vec![Value::Text(label), Value::Int(n)])
        .collect()
}

fn bump(groups: &mut Vec<(String, i64)>, label: &str) {
    match groups.iter_mut().find(|g| g.0 == label) {
        Some(g) => g.1 += 1,
        None => groups.push((label.to_string(), 1)),
    }
}

fn profile(t: &ClinicalTables, pids: &[i64], reference: NaiveDate) -> Vec<Vec<Value>> {
    let mut counts = [0i64; 4];
    for &pid in pids {
        for p in t.patients() {
            if p.pid == pid {
                counts[bracket(completed_years(p.dob, reference))] += 1;
            }
        }
    }
    vec![counts.iter().map(|&n| Value::Int(n)).collect()]
}

/// Evaluate a canonical query by exhaustive scan.
pub fn oracle(
    t: &ClinicalTables,
    query_id: &str,
    params: &[(String, String)],
    reference: NaiveDate,
) -> Vec<Vec<Value>> {
    match query_id {
        id if id == Q1 => {
            let (lo, hi) = (date(params, "start"), date(params, "end"));
            let mut groups = Vec::new();
            for e in t.examinations() {
                if !within(e.endoscopy_date, lo, hi) {
                    continue;
                }
                for p in t.patients() {
                    if p.pid == e.patient_id {
                        bump(&mut groups, &p.country);
                    }
                }
            }
            rank(groups, None)
        }
        id if id == Q2 => {
            let (lo, hi) = (date(params, "start"), date(params, "end"));
            let mut groups = Vec::new();
            for e in t.examinations() {
                if within(e.endoscopy_date, lo, hi) {
                    bump(&mut groups, &e.diagnoses_text);
                }
            }
            rank(groups, Some(5))
        }
        id if id == Q3 => {
            let (lo, hi) = (date(params, "start"), date(params, "end"));
            let mut pids = Vec::new();
            for e in t.examinations() {
                if within(e.endoscopy_date, lo, hi) {
                    push_unique(&mut pids, e.patient_id);
                }
            }
            profile(t, &pids, reference)
        }
        id if id == Q4 => {
            let mut rows = Vec::new();
            for gender in ["F", "M"] {
                let mut n = 0;
                for p in t.patients() {
                    if p.gender.as_str() != gender {
                        continue;
                    }
                    let first = t
                        .clinical_detections()
                        .iter()
                        .any(|d| d.patient_id == p.pid && d.times == 1 && d.hbsag == 0);
                    let third = t
                        .clinical_detections()
                        .iter()
                        .any(|d| d.patient_id == p.pid && d.times == 3 && d.antihbs == 0);
                    if first && third {
                        n += 1;
                    }
                }
                if n > 0 {
                    rows.push(vec![Value::Text(gender.into()), Value::Int(n)]);
                }
            }
            rows
        }
        id if id == Q5 => {
            let (lo, hi) = (date(params, "start"), date(params, "end"));
            let n = t
                .prescriptions()
                .iter()
                .filter(|p| within(p.prescription_date, lo, hi))
                .count();
            vec![vec![Value::Int(n as i64)]]
        }
        id if id == Q6 => {
            let (lo, hi) = (date(params, "start"), date(params, "end"));
            let name = param(params, "doctor_name");
            let mut pids = Vec::new();
            for rx in t.prescriptions() {
                if !within(rx.prescription_date, lo, hi) {
                    continue;
                }
                for d in t.doctors() {
                    if d.doctor_id == rx.doctor_id
                        && format!("{} {}", d.given_name, d.family_name) == name
                    {
                        push_unique(&mut pids, rx.patient_id);
                    }
                }
            }
            vec![vec![Value::Int(pids.len() as i64)]]
        }
        id if id == Q7 => {
            let (lo, hi) = (date(params, "start"), date(params, "end"));
            let name = param(params, "medication");
            let mut pids = Vec::new();
            for m in t.medications() {
                if m.medication_name != name {
                    continue;
                }
                for pm in t.prescript_meds() {
                    if pm.medication_id != m.medication_id {
                        continue;
                    }
                    for rx in t.prescriptions() {
                        if rx.prescription_id == pm.prescription_id
                            && within(rx.prescription_date, lo, hi)
                        {
                            push_unique(&mut pids, rx.patient_id);
                        }
                    }
                }
            }
            profile(t, &pids, reference)
        }
        id if id == Q8 => {
            let (lo, hi) = (date(params, "start"), date(params, "end"));
            let mut groups = Vec::new();
            for m in t.medications() {
                let mut pids = Vec::new();
                for pm in t.prescript_meds() {
                    if pm.medication_id != m.medication_id {
                        continue;
                    }
                    for rx in t.prescriptions() {
                        if rx.prescription_id == pm.prescription_id
                            && within(rx.prescription_date, lo, hi)
                        {
                            push_unique(&mut pids, rx.patient_id);
                        }
                    }
                }
                groups.push((m.medication_name.clone(), pids.len() as i64));
            }
            rank(groups, Some(5))
        }
        other => panic!("no oracle for {other}"),
    }
}

fn random_date<R: Rng>(rng: &mut R) -> NaiveDate {
    let start = NaiveDate::from_ymd_opt(2008, 6, 1).unwrap();
    start + chrono::Days::new(rng.gen_range(0..3_800))
}

/// A random valid parameter set for a canonical query. Text parameters are
/// usually drawn from the tables and sometimes from values that match nothing.
pub fn random_params<R: Rng>(
    rng: &mut R,
    t: &ClinicalTables,
    query_id: &str,
) -> Vec<(String, String)> {
    let mut out = Vec::new();
    if query_id == Q6 {
        let name = match t.doctors().choose(rng) {
            Some(d) if rng.gen_bool(0.9) => format!("{} {}", d.given_name, d.family_name),
            _ => "Nobody Known".to_string(),
        };
        out.push(("doctor_name".to_string(), name));
    }
    if query_id == Q7 {
        let name = match t.medications().choose(rng) {
            Some(m) if rng.gen_bool(0.9) => m.medication_name.clone(),
            _ => "Placebo".to_string(),
        };
        out.push(("medication".to_string(), name));
    }
    if query_id != Q4 {
        let (a, b) = (random_date(rng), random_date(rng));
        let (lo, hi) = if rng.gen_bool(0.1) {
            (b, a)
        } else {
            (a.min(b), a.max(b))
        };
        out.push(("start".to_string(), lo.to_string()));
        out.push(("end".to_string(), hi.to_string()));
    }
    out
}

/// Values that could identify a patient if they leaked into a response.
pub fn identifying_values(t: &ClinicalTables) -> Vec<String> {
    let mut out = Vec::new();
    for p in t.patients() {
        out.push(p.name.clone());
        out.push(p.surname.clone());
        out.push(format!("{} {}", p.name, p.surname));
        out.push(p.street_address.clone());
        out.push(p.city.clone());
        out.push(p.postal.clone());
    }
    out.sort();
    out.dedup();
    out
}

/// Strings the default guards must reject as query parameter values.
pub fn injection_corpus() -> Vec<String> {
    let classic = [
        "' OR '1'='1",
        "' OR 1=1 --",
        "\" OR \"\"=\"",
        "1; DROP TABLE patient",
        "2010-01-01'; DELETE FROM examination; --",
        "admin'--",
        "x' UNION SELECT name FROM patient --",
        "1 /* comment */",
        "*/ SELECT 1",
        "\\x27",
        "Robert'); DROP TABLE doctor;--",
        "2010-01-01 -- trailing",
        "Tom Baker' AND '1'='1",
        "Abilify\"",
        "SELECT name FROM patient",
        "SELECT age FROM patient",
        "address",
        "ZipCode",
        "patient.Name",
        "Age > 40",
        "street address",
        "ZIPCODE 8010",
        "surname",
        "username",
        "page",
        "usage",
        "nAmE",
        "1' AND SLEEP(5)#",
        "%27; --",
        "\\\\",
        "a;b",
        "';",
        "\"",
        "'",
        ";",
        "--",
        "/*",
        "*/",
    ];
    let mut out: Vec<String> = classic.iter().map(|s| s.to_string()).collect();
    for token in ["'", "\"", ";", "\\", "--", "/*", "*/"] {
        out.push(format!("2010-01-01{token}"));
        out.push(format!("{token}Austria"));
    }
    out
}
