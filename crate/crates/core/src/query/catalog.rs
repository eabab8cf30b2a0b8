//! The eight canonical aggregate queries.
//!
//! q1 to q4 run on the health-record service over examinations and clinical
//! detections; q5 to q8 run on the medical-record service over prescriptions.
//! Date windows are inclusive on both ends. Ages are completed years at the
//! engine's reference date, bucketed into [0,18), [18,40), [40,60), [60,inf).

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::Arc;

use chrono::NaiveDate;

use super::{ParamKind, ParamSpec, PlanInput, QueryDefinition, ResourceService, Value};
use crate::store::{Gender, PatientRecord};
use crate::synth::age_on;

pub const Q1: &str = "q1_exam_by_country";
pub const Q2: &str = "q2_top5_diagnoses";
pub const Q3: &str = "q3_age_profile";
pub const Q4: &str = "q4_hepb_susceptible_by_gender";
pub const Q5: &str = "q5_total_prescriptions";
pub const Q6: &str = "q6_patients_by_doctor";
pub const Q7: &str = "q7_age_profile_medication";
pub const Q8: &str = "q8_top5_medications";

pub const CANONICAL_IDS: [&str; 8] = [Q1, Q2, Q3, Q4, Q5, Q6, Q7, Q8];

pub const AGE_PROFILE_COLUMNS: [&str; 4] = [
    "NumBelow18",
    "Num18ToBelow40",
    "Num40ToBelow60",
    "Num60AndAbove",
];

const TOP_N: usize = 5;

/// Index into [`AGE_PROFILE_COLUMNS`] for an age in completed years.
pub fn age_bracket(age: u32) -> usize {
    match age {
        0..=17 => 0,
        18..=39 => 1,
        40..=59 => 2,
        _ => 3,
    }
}

fn window() -> Vec<ParamSpec> {
    vec![
        ParamSpec::new("start", ParamKind::Date),
        ParamSpec::new("end", ParamKind::Date),
    ]
}

fn in_window(d: NaiveDate, start: NaiveDate, end: NaiveDate) -> bool {
    start <= d && d <= end
}

fn def(
    id: &str,
    description: &str,
    params: Vec<ParamSpec>,
    columns: &[&str],
    service: ResourceService,
    plan: impl Fn(&PlanInput<'_>) -> Vec<Vec<Value>> + Send + Sync + 'static,
) -> QueryDefinition {
    QueryDefinition {
        query_id: id.to_string(),
        description: description.to_string(),
        params,
        output_columns: columns.iter().map(|c| c.to_string()).collect(),
        service,
        plan: Arc::new(plan),
        aggregate_only: true,
    }
}

pub fn canonical_catalog() -> Vec<QueryDefinition> {
    use ResourceService::{HealthRecord, MedicalRecord};
    vec![
        def(
            Q1,
            "Total number of endoscopic examinations per country within the date window",
            window(),
            &["Country", "TotalNum"],
            HealthRecord,
            exam_by_country,
        ),
        def(
            Q2,
            "Top 5 diagnoses among endoscopic examinations within the date window, with the number of cases for each",
            window(),
            &["DiagnosesText", "Number"],
            HealthRecord,
            top5_diagnoses,
        ),
        def(
            Q3,
            "Endoscopic patients per years-old bracket (below 18, 18 to below 40, 40 to below 60, 60 and above) within the date window",
            window(),
            &AGE_PROFILE_COLUMNS,
            HealthRecord,
            exam_age_profile,
        ),
        def(
            Q4,
            "Patients per gender still susceptible to hepatitis B after full vaccination: baseline HBsAg and third-visit anti-HBs both negative",
            vec![],
            &["Gender", "NumberOfPatients"],
            HealthRecord,
            hepb_susceptible_by_gender,
        ),
        def(
            Q5,
            "Total number of prescriptions made within the date window",
            window(),
            &["TotalPrescriptions"],
            MedicalRecord,
            total_prescriptions,
        ),
        def(
            Q6,
            "Total number of patients who received a prescription from the given doctor within the date window",
            vec![
                ParamSpec::new("doctor_name", ParamKind::DoctorNameText),
                ParamSpec::new("start", ParamKind::Date),
                ParamSpec::new("end", ParamKind::Date),
            ],
            &["NumberOfPatients"],
            MedicalRecord,
            patients_by_doctor,
        ),
        def(
            Q7,
            "Patients per years-old bracket (below 18, 18 to below 40, 40 to below 60, 60 and above) who took the given medication within the date window",
            vec![
                ParamSpec::new("medication", ParamKind::MedicationText),
                ParamSpec::new("start", ParamKind::Date),
                ParamSpec::new("end", ParamKind::Date),
            ],
            &AGE_PROFILE_COLUMNS,
            MedicalRecord,
            medication_age_profile,
        ),
        def(
            Q8,
            "Top 5 medications given in prescriptions within the date window, with the number of patients who took each",
            window(),
            &["Medication", "NumberOfPatients"],
            MedicalRecord,
            top5_medications,
        ),
    ]
}

/// Sort `(label, count)` groups by count descending then label ascending.
fn ranked(groups: HashMap<String, usize>) -> Vec<(String, usize)> {
    let mut out: Vec<_> = groups.into_iter().filter(|(_, n)| *n > 0).collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

fn group_rows(groups: Vec<(String, usize)>) -> Vec<Vec<Value>> {
    groups
        .into_iter()
        .map(|(label, n)| vec![Value::Text(label), Value::from(n)])
        .collect()
}

fn patient_index<'a>(input: &PlanInput<'a>) -> HashMap<i64, &'a PatientRecord> {
    input.tables.patients().iter().map(|p| (p.pid, p)).collect()
}

fn age_profile_row(
    pids: &HashSet<i64>,
    patients: &HashMap<i64, &PatientRecord>,
    reference: NaiveDate,
) -> Vec<Vec<Value>> {
    let mut counts = [0usize; 4];
    for pid in pids {
        let p = patients[pid];
        counts[age_bracket(age_on(p.dob, reference))] += 1;
    }
    vec![counts.iter().map(|&n| Value::from(n)).collect()]
}

fn exam_by_country(input: &PlanInput<'_>) -> Vec<Vec<Value>> {
    let (start, end) = (input.bindings.date("start"), input.bindings.date("end"));
    let patients = patient_index(input);
    let mut groups: HashMap<String, usize> = HashMap::new();
    for e in input.tables.examinations() {
        if in_window(e.endoscopy_date, start, end) {
            *groups
                .entry(patients[&e.patient_id].country.clone())
                .or_default() += 1;
        }
    }
    group_rows(ranked(groups))
}

fn top5_diagnoses(input: &PlanInput<'_>) -> Vec<Vec<Value>> {
    let (start, end) = (input.bindings.date("start"), input.bindings.date("end"));
    let mut groups: HashMap<String, usize> = HashMap::new();
    for e in input.tables.examinations() {
        if in_window(e.endoscopy_date, start, end) {
            *groups.entry(e.diagnoses_text.clone()).or_default() += 1;
        }
    }
    let mut top = ranked(groups);
    top.truncate(TOP_N);
    group_rows(top)
}

fn exam_age_profile(input: &PlanInput<'_>) -> Vec<Vec<Value>> {
    let (start, end) = (input.bindings.date("start"), input.bindings.date("end"));
    let pids: HashSet<i64> = input
        .tables
        .examinations()
        .iter()
        .filter(|e| in_window(e.endoscopy_date, start, end))
        .map(|e| e.patient_id)
        .collect();
    age_profile_row(&pids, &patient_index(input), input.reference_date)
}

fn hepb_susceptible_by_gender(input: &PlanInput<'_>) -> Vec<Vec<Value>> {
    let detections = input.tables.clinical_detections();
    let baseline_negative: HashSet<i64> = detections
        .iter()
        .filter(|d| d.times == 1 && d.hbsag == 0)
        .map(|d| d.patient_id)
        .collect();
    let third_negative: HashSet<i64> = detections
        .iter()
        .filter(|d| d.times == 3 && d.antihbs == 0)
        .map(|d| d.patient_id)
        .collect();
    let patients = patient_index(input);
    let mut by_gender: BTreeMap<Gender, usize> = BTreeMap::new();
    for pid in baseline_negative.intersection(&third_negative) {
        *by_gender.entry(patients[pid].gender).or_default() += 1;
    }
    by_gender
        .into_iter()
        .map(|(g, n)| vec![Value::from(g.as_str()), Value::from(n)])
        .collect()
}

fn total_prescriptions(input: &PlanInput<'_>) -> Vec<Vec<Value>> {
    let (start, end) = (input.bindings.date("start"), input.bindings.date("end"));
    let n = input
        .tables
        .prescriptions()
        .iter()
        .filter(|p| in_window(p.prescription_date, start, end))
        .count();
    vec![vec![Value::from(n)]]
}

fn patients_by_doctor(input: &PlanInput<'_>) -> Vec<Vec<Value>> {
    let (start, end) = (input.bindings.date("start"), input.bindings.date("end"));
    let wanted = input.bindings.text("doctor_name");
    let doctors: HashSet<i64> = input
        .tables
        .doctors()
        .iter()
        .filter(|d| d.full_name() == wanted)
        .map(|d| d.doctor_id)
        .collect();
    let pids: HashSet<i64> = input
        .tables
        .prescriptions()
        .iter()
        .filter(|p| doctors.contains(&p.doctor_id) && in_window(p.prescription_date, start, end))
        .map(|p| p.patient_id)
        .collect();
    vec![vec![Value::from(pids.len())]]
}

/// prescription_id -> patient_id for prescriptions inside the window.
fn prescriptions_in_window(input: &PlanInput<'_>) -> HashMap<i64, i64> {
    let (start, end) = (input.bindings.date("start"), input.bindings.date("end"));
    input
        .tables
        .prescriptions()
        .iter()
        .filter(|p| in_window(p.prescription_date, start, end))
        .map(|p| (p.prescription_id, p.patient_id))
        .collect()
}

fn medication_age_profile(input: &PlanInput<'_>) -> Vec<Vec<Value>> {
    let wanted = input.bindings.text("medication");
    let medication = input
        .tables
        .medications()
        .iter()
        .find(|m| m.medication_name == wanted)
        .map(|m| m.medication_id);
    let in_range = prescriptions_in_window(input);
    let pids: HashSet<i64> = match medication {
        Some(mid) => input
            .tables
            .prescript_meds()
            .iter()
            .filter(|pm| pm.medication_id == mid)
            .filter_map(|pm| in_range.get(&pm.prescription_id).copied())
            .collect(),
        None => HashSet::new(),
    };
    age_profile_row(&pids, &patient_index(input), input.reference_date)
}

fn top5_medications(input: &PlanInput<'_>) -> Vec<Vec<Value>> {
    let in_range = prescriptions_in_window(input);
    let names: HashMap<i64, &str> = input
        .tables
        .medications()
        .iter()
        .map(|m| (m.medication_id, m.medication_name.as_str()))
        .collect();
    let mut patients_per_med: HashMap<i64, HashSet<i64>> = HashMap::new();
    for pm in input.tables.prescript_meds() {
        if let Some(&pid) = in_range.get(&pm.prescription_id) {
            patients_per_med
                .entry(pm.medication_id)
                .or_default()
                .insert(pid);
        }
    }
    let groups = patients_per_med
        .into_iter()
        .map(|(mid, pids)| (names[&mid].to_string(), pids.len()))
        .collect();
    let mut top = ranked(groups);
    top.truncate(TOP_N);
    group_rows(top)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::guard::GuardConfig;
    use crate::query::{execute, EngineConfig, QueryRegistry};
    use crate::store::{ClinicalTables, ExaminationRecord, TableParts};

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn patient(pid: i64, dob: &str) -> PatientRecord {
        PatientRecord {
            pid,
            name: "Ida".into(),
            surname: "Sed".into(),
            gender: Gender::M,
            dob: d(dob),
            country: "Hungary".into(),
            street_address: "Magna Platz 3".into(),
            city: "Szeged".into(),
            postal: "06720".into(),
        }
    }

    fn run(tables: &ClinicalTables, id: &str, params: &[(&str, &str)]) -> Vec<Vec<Value>> {
        let registry = QueryRegistry::canonical(GuardConfig::default());
        let bound = registry.bind(id, params).unwrap();
        execute(&bound, tables, &EngineConfig::default())
            .rows()
            .to_vec()
    }

    const YEAR_2010: [(&str, &str); 2] = [("start", "2010-01-01"), ("end", "2010-12-31")];

    #[test]
    fn catalog_has_eight_registrable_definitions() {
        let catalog = canonical_catalog();
        assert_eq!(catalog.len(), 8);
        let mut registry = QueryRegistry::new(GuardConfig::default());
        for def in catalog {
            registry.register_query(def).unwrap();
        }
        assert_eq!(registry.ids().collect::<Vec<_>>(), CANONICAL_IDS);
    }

    #[test]
    fn empty_tables() {
        let empty = ClinicalTables::empty();
        assert!(run(&empty, Q1, &YEAR_2010).is_empty());
        assert!(run(&empty, Q2, &YEAR_2010).is_empty());
        let zeros: Vec<Value> = vec![0i64.into(); 4];
        assert_eq!(run(&empty, Q3, &YEAR_2010), vec![zeros.clone()]);
        assert!(run(&empty, Q4, &[]).is_empty());
        assert_eq!(run(&empty, Q5, &YEAR_2010), vec![vec![Value::Int(0)]]);
        assert_eq!(
            run(
                &empty,
                Q6,
                &[("doctor_name", "Tom Baker"), YEAR_2010[0], YEAR_2010[1]]
            ),
            vec![vec![Value::Int(0)]]
        );
        assert_eq!(
            run(
                &empty,
                Q7,
                &[("medication", "Abilify"), YEAR_2010[0], YEAR_2010[1]]
            ),
            vec![zeros]
        );
        assert!(run(&empty, Q8, &YEAR_2010).is_empty());
    }

    #[test]
    fn patient_turning_forty_on_reference_date_is_in_third_bracket() {
        // Reference date 2018-01-01: born 1978-01-01 is exactly 40.
        let tables = ClinicalTables::from_parts(TableParts {
            patients: vec![patient(1, "1978-01-01")],
            examinations: vec![ExaminationRecord {
                report_id: 1,
                patient_id: 1,
                endoscopy_date: d("2010-06-01"),
                diagnoses_text: "Stomach: Normal".into(),
            }],
            ..Default::default()
        })
        .unwrap();
        let row = run(&tables, Q3, &YEAR_2010);
        assert_eq!(
            row,
            vec![vec![0i64.into(), 0i64.into(), 1i64.into(), 0i64.into()]]
        );
    }

    #[test]
    fn window_bounds_are_inclusive_and_patients_distinct() {
        let exam = |id, pid, date: &str| ExaminationRecord {
            report_id: id,
            patient_id: pid,
            endoscopy_date: d(date),
            diagnoses_text: "Stomach: Polyp".into(),
        };
        let tables = ClinicalTables::from_parts(TableParts {
            patients: vec![patient(1, "2005-03-03"), patient(2, "1950-03-03")],
            examinations: vec![
                exam(1, 1, "2010-01-01"),
                exam(2, 1, "2010-12-31"),
                exam(3, 2, "2011-01-01"),
            ],
            ..Default::default()
        })
        .unwrap();
        assert_eq!(
            run(&tables, Q1, &YEAR_2010),
            vec![vec![Value::from("Hungary"), Value::Int(2)]]
        );
        assert_eq!(
            run(&tables, Q3, &YEAR_2010),
            vec![vec![1i64.into(), 0i64.into(), 0i64.into(), 0i64.into()]]
        );
    }

    #[test]
    fn ranking_breaks_ties_by_label() {
        let mut groups = HashMap::new();
        for (label, n) in [("b", 2), ("a", 2), ("c", 5), ("z", 0)] {
            groups.insert(label.to_string(), n);
        }
        let order: Vec<_> = ranked(groups).into_iter().map(|(l, _)| l).collect();
        assert_eq!(order, ["c", "a", "b"]);
    }

    #[test]
    fn brackets() {
        assert_eq!(
            [0, 17, 18, 39, 40, 59, 60, 120].map(age_bracket),
            [0, 0, 1, 1, 2, 2, 3, 3]
        );
    }
}
