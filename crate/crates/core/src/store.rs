//! Typed in-memory clinical tables with referential integrity, and their
//! on-disk form: one RFC-4180 CSV file per table, UTF-8, `\n` line endings,
//! header row carrying the exact field names.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("missing table file {0}")]
    MissingTableFile(PathBuf),
    #[error("malformed row in {file} at line {line}: {reason}")]
    MalformedRow {
        file: String,
        line: u64,
        reason: String,
    },
    #[error("duplicate key {key} in table {table}")]
    DuplicateKey { table: &'static str, key: String },
    #[error("table {table} row {row}: unresolved reference {reference}")]
    ReferentialIntegrityViolation {
        table: &'static str,
        row: usize,
        reference: String,
    },
    #[error("table {table} row {row}: invalid value for {field}")]
    InvalidValue {
        table: &'static str,
        row: usize,
        field: &'static str,
    },
    #[error("i/o failure on {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Gender {
    F,
    M,
}

impl Gender {
    pub fn as_str(self) -> &'static str {
        match self {
            Gender::F => "F",
            Gender::M => "M",
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub pid: i64,
    pub name: String,
    pub surname: String,
    pub gender: Gender,
    pub dob: NaiveDate,
    pub country: String,
    pub street_address: String,
    pub city: String,
    pub postal: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExaminationRecord {
    pub report_id: i64,
    pub patient_id: i64,
    pub endoscopy_date: NaiveDate,
    pub diagnoses_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClinicalDetectionRecord {
    pub detection_id: i64,
    pub patient_id: i64,
    /// Visit index within a detection sequence, 1 = baseline.
    pub times: u32,
    pub hbsag: u8,
    pub antihbs: u8,
    pub detection_date: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DoctorRecord {
    pub doctor_id: i64,
    pub given_name: String,
    pub family_name: String,
}

impl DoctorRecord {
    /// `given_name family_name`, the form matched by doctor-name parameters.
    pub fn full_name(&self) -> String {
        format!("{} {}", self.given_name, self.family_name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrescriptionRecord {
    pub prescription_id: i64,
    pub patient_id: i64,
    pub doctor_id: i64,
    pub prescription_date: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MedicationRecord {
    pub medication_id: i64,
    pub medication_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrescriptMedRecord {
    pub prescription_id: i64,
    pub medication_id: i64,
}

/// Unvalidated table contents. Turn into [`ClinicalTables`] with
/// [`ClinicalTables::from_parts`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TableParts {
    pub patients: Vec<PatientRecord>,
    pub examinations: Vec<ExaminationRecord>,
    pub clinical_detections: Vec<ClinicalDetectionRecord>,
    pub doctors: Vec<DoctorRecord>,
    pub prescriptions: Vec<PrescriptionRecord>,
    pub medications: Vec<MedicationRecord>,
    pub prescript_meds: Vec<PrescriptMedRecord>,
}

/// The seven clinical tables. Always valid: construction checks key
/// uniqueness, value domains and every foreign-key reference, and there is
/// no way to mutate a value once built.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClinicalTables {
    parts: TableParts,
}

pub const PATIENT_FILE: &str = "patient.csv";
pub const EXAMINATION_FILE: &str = "examination.csv";
pub const CLINICAL_DETECTION_FILE: &str = "clinicaldetection.csv";
pub const DOCTOR_FILE: &str = "doctor.csv";
pub const PRESCRIPTION_FILE: &str = "prescription.csv";
pub const MEDICATION_FILE: &str = "medication.csv";
pub const PRESCRIPT_MED_FILE: &str = "prescriptmed.csv";

pub const TABLE_FILES: [&str; 7] = [
    PATIENT_FILE,
    EXAMINATION_FILE,
    CLINICAL_DETECTION_FILE,
    DOCTOR_FILE,
    PRESCRIPTION_FILE,
    MEDICATION_FILE,
    PRESCRIPT_MED_FILE,
];

const PATIENT_HEADER: &[&str] = &[
    "pid",
    "name",
    "surname",
    "gender",
    "dob",
    "country",
    "street_address",
    "city",
    "postal",
];
const EXAMINATION_HEADER: &[&str] = &[
    "report_id",
    "patient_id",
    "endoscopy_date",
    "diagnoses_text",
];
const CLINICAL_DETECTION_HEADER: &[&str] = &[
    "detection_id",
    "patient_id",
    "times",
    "hbsag",
    "antihbs",
    "detection_date",
];
const DOCTOR_HEADER: &[&str] = &["doctor_id", "given_name", "family_name"];
const PRESCRIPTION_HEADER: &[&str] = &[
    "prescription_id",
    "patient_id",
    "doctor_id",
    "prescription_date",
];
const MEDICATION_HEADER: &[&str] = &["medication_id", "medication_name"];
const PRESCRIPT_MED_HEADER: &[&str] = &["prescription_id", "medication_id"];

impl ClinicalTables {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_parts(parts: TableParts) -> Result<Self, StoreError> {
        validate(&parts)?;
        Ok(Self { parts })
    }

    pub fn patients(&self) -> &[PatientRecord] {
        &self.parts.patients
    }

    pub fn examinations(&self) -> &[ExaminationRecord] {
        &self.parts.examinations
    }

    pub fn clinical_detections(&self) -> &[ClinicalDetectionRecord] {
        &self.parts.clinical_detections
    }

    pub fn doctors(&self) -> &[DoctorRecord] {
        &self.parts.doctors
    }

    pub fn prescriptions(&self) -> &[PrescriptionRecord] {
        &self.parts.prescriptions
    }

    pub fn medications(&self) -> &[MedicationRecord] {
        &self.parts.medications
    }

    pub fn prescript_meds(&self) -> &[PrescriptMedRecord] {
        &self.parts.prescript_meds
    }

    /// Row counts in file order (patient, examination, clinicaldetection,
    /// doctor, prescription, medication, prescriptmed).
    pub fn row_counts(&self) -> [usize; 7] {
        let p = &self.parts;
        [
            p.patients.len(),
            p.examinations.len(),
            p.clinical_detections.len(),
            p.doctors.len(),
            p.prescriptions.len(),
            p.medications.len(),
            p.prescript_meds.len(),
        ]
    }

    pub fn into_parts(self) -> TableParts {
        self.parts
    }
}

fn unique_keys<T, K, F>(table: &'static str, rows: &[T], key: F) -> Result<HashSet<K>, StoreError>
where
    K: std::hash::Hash + Eq + fmt::Display + Clone,
    F: Fn(&T) -> K,
{
    let mut seen = HashSet::with_capacity(rows.len());
    for row in rows {
        let k = key(row);
        if !seen.insert(k.clone()) {
            return Err(StoreError::DuplicateKey {
                table,
                key: k.to_string(),
            });
        }
    }
    Ok(seen)
}

fn check_ref(
    keys: &HashSet<i64>,
    table: &'static str,
    row: usize,
    column: &str,
    value: i64,
) -> Result<(), StoreError> {
    if keys.contains(&value) {
        Ok(())
    } else {
        Err(StoreError::ReferentialIntegrityViolation {
            table,
            row: row + 1,
            reference: format!("{column}={value}"),
        })
    }
}

fn validate(p: &TableParts) -> Result<(), StoreError> {
    let pids = unique_keys("patient", &p.patients, |r| r.pid)?;
    unique_keys("examination", &p.examinations, |r| r.report_id)?;
    unique_keys("clinicaldetection", &p.clinical_detections, |r| {
        r.detection_id
    })?;
    let doctor_ids = unique_keys("doctor", &p.doctors, |r| r.doctor_id)?;
    let prescription_ids = unique_keys("prescription", &p.prescriptions, |r| r.prescription_id)?;
    let medication_ids = unique_keys("medication", &p.medications, |r| r.medication_id)?;
    unique_keys("medication", &p.medications, |r| r.medication_name.clone())?;
    unique_keys("prescriptmed", &p.prescript_meds, |r| {
        format!("({},{})", r.prescription_id, r.medication_id)
    })?;

    for (i, r) in p.examinations.iter().enumerate() {
        check_ref(&pids, "examination", i, "patient_id", r.patient_id)?;
    }
    for (i, r) in p.clinical_detections.iter().enumerate() {
        check_ref(&pids, "clinicaldetection", i, "patient_id", r.patient_id)?;
        let field = if r.times < 1 {
            Some("times")
        } else if r.hbsag > 1 {
            Some("hbsag")
        } else if r.antihbs > 1 {
            Some("antihbs")
        } else {
            None
        };
        if let Some(field) = field {
            return Err(StoreError::InvalidValue {
                table: "clinicaldetection",
                row: i + 1,
                field,
            });
        }
    }
    for (i, r) in p.prescriptions.iter().enumerate() {
        check_ref(&pids, "prescription", i, "patient_id", r.patient_id)?;
        check_ref(&doctor_ids, "prescription", i, "doctor_id", r.doctor_id)?;
    }
    for (i, r) in p.prescript_meds.iter().enumerate() {
        check_ref(
            &prescription_ids,
            "prescriptmed",
            i,
            "prescription_id",
            r.prescription_id,
        )?;
        check_ref(
            &medication_ids,
            "prescriptmed",
            i,
            "medication_id",
            r.medication_id,
        )?;
    }
    Ok(())
}

fn read_table<T: DeserializeOwned>(
    dir: &Path,
    file: &str,
    header: &[&str],
) -> Result<Vec<T>, StoreError> {
    let path = dir.join(file);
    if !path.is_file() {
        return Err(StoreError::MissingTableFile(path));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(&path)
        .map_err(|e| csv_error(file, &path, e))?;
    let found = reader.headers().map_err(|e| csv_error(file, &path, e))?;
    if found.iter().ne(header.iter().copied()) {
        return Err(StoreError::MalformedRow {
            file: file.to_string(),
            line: 1,
            reason: format!("expected header {}", header.join(",")),
        });
    }
    let mut rows = Vec::new();
    for result in reader.deserialize() {
        rows.push(result.map_err(|e| csv_error(file, &path, e))?);
    }
    Ok(rows)
}

fn csv_error(file: &str, path: &Path, err: csv::Error) -> StoreError {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    match err.into_kind() {
        csv::ErrorKind::Io(source) => StoreError::IoFailure {
            path: path.to_path_buf(),
            source,
        },
        kind => StoreError::MalformedRow {
            file: file.to_string(),
            line,
            reason: format!("{kind:?}"),
        },
    }
}

/// Load and validate the seven table files under `dir`.
pub fn load_tables(dir: impl AsRef<Path>) -> Result<ClinicalTables, StoreError> {
    let dir = dir.as_ref();
    for file in TABLE_FILES {
        let path = dir.join(file);
        if !path.is_file() {
            return Err(StoreError::MissingTableFile(path));
        }
    }
    let parts = TableParts {
        patients: read_table(dir, PATIENT_FILE, PATIENT_HEADER)?,
        examinations: read_table(dir, EXAMINATION_FILE, EXAMINATION_HEADER)?,
        clinical_detections: read_table(dir, CLINICAL_DETECTION_FILE, CLINICAL_DETECTION_HEADER)?,
        doctors: read_table(dir, DOCTOR_FILE, DOCTOR_HEADER)?,
        prescriptions: read_table(dir, PRESCRIPTION_FILE, PRESCRIPTION_HEADER)?,
        medications: read_table(dir, MEDICATION_FILE, MEDICATION_HEADER)?,
        prescript_meds: read_table(dir, PRESCRIPT_MED_FILE, PRESCRIPT_MED_HEADER)?,
    };
    ClinicalTables::from_parts(parts)
}

fn write_table<T: Serialize>(
    dir: &Path,
    file: &str,
    header: &[&str],
    rows: &[T],
) -> Result<(), StoreError> {
    let path = dir.join(file);
    let io_err = |source| StoreError::IoFailure {
        path: path.clone(),
        source,
    };
    let out = File::create(&path).map_err(io_err)?;
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(out));
    let into_io = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => io,
        other => std::io::Error::other(format!("{other:?}")),
    };
    writer
        .write_record(header)
        .map_err(|e| io_err(into_io(e)))?;
    for row in rows {
        writer.serialize(row).map_err(|e| io_err(into_io(e)))?;
    }
    let mut inner = writer
        .into_inner()
        .map_err(|e| io_err(std::io::Error::other(e.to_string())))?;
    inner.flush().map_err(io_err)
}

/// Write all seven tables into `dir`, creating it if needed.
pub fn save_tables(tables: &ClinicalTables, dir: impl AsRef<Path>) -> Result<(), StoreError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|source| StoreError::IoFailure {
        path: dir.to_path_buf(),
        source,
    })?;
    let p = &tables.parts;
    write_table(dir, PATIENT_FILE, PATIENT_HEADER, &p.patients)?;
    write_table(dir, EXAMINATION_FILE, EXAMINATION_HEADER, &p.examinations)?;
    write_table(
        dir,
        CLINICAL_DETECTION_FILE,
        CLINICAL_DETECTION_HEADER,
        &p.clinical_detections,
    )?;
    write_table(dir, DOCTOR_FILE, DOCTOR_HEADER, &p.doctors)?;
    write_table(
        dir,
        PRESCRIPTION_FILE,
        PRESCRIPTION_HEADER,
        &p.prescriptions,
    )?;
    write_table(dir, MEDICATION_FILE, MEDICATION_HEADER, &p.medications)?;
    write_table(
        dir,
        PRESCRIPT_MED_FILE,
        PRESCRIPT_MED_HEADER,
        &p.prescript_meds,
    )?;
    Ok(())
}
