//! Deterministic synthetic clinical dataset generator.
//!
//! Every table draws from its own ChaCha8 stream keyed by the seed, so the
//! output is a pure function of [`GenSpec`] and changing the row count of one
//! table leaves the random draws of the others untouched.

pub mod pools;

use std::collections::HashSet;

use chrono::{Days, Months, NaiveDate};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::store::{
    ClinicalDetectionRecord, ClinicalTables, DoctorRecord, ExaminationRecord, Gender,
    MedicationRecord, PatientRecord, PrescriptMedRecord, PrescriptionRecord, StoreError,
    TableParts,
};

#[derive(Debug, Error)]
pub enum GenError {
    #[error("inconsistent generator spec: {0}")]
    InconsistentSpec(String),
    #[error("generated tables failed validation: {0}")]
    Invalid(#[from] StoreError),
}

/// Fraction of patients that receive a complete three-visit hepatitis B
/// detection sequence.
pub const HEPB_COHORT_RATE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenSpec {
    pub seed: u64,
    pub rows_patient: usize,
    pub rows_examination: usize,
    pub rows_clinicaldetection: usize,
    pub rows_doctor: usize,
    pub rows_prescription: usize,
    pub rows_medication: usize,
    pub rows_prescriptmed: usize,
    pub reference_date: NaiveDate,
    pub date_window_start: NaiveDate,
    pub date_window_end: NaiveDate,
}

pub const DEFAULT_REFERENCE_DATE: NaiveDate = match NaiveDate::from_ymd_opt(2018, 1, 1) {
    Some(d) => d,
    None => panic!("invalid date"),
};

impl Default for GenSpec {
    fn default() -> Self {
        Self {
            seed: 42,
            rows_patient: 1_881,
            rows_examination: 2_020,
            rows_clinicaldetection: 6_393,
            rows_doctor: 912,
            rows_prescription: 3_856,
            rows_medication: 100,
            rows_prescriptmed: 8_801,
            reference_date: DEFAULT_REFERENCE_DATE,
            date_window_start: NaiveDate::from_ymd_opt(2009, 1, 1).unwrap(),
            date_window_end: NaiveDate::from_ymd_opt(2017, 12, 31).unwrap(),
        }
    }
}

impl GenSpec {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    /// Spec with every row count zero.
    pub fn empty(seed: u64) -> Self {
        Self {
            seed,
            rows_patient: 0,
            rows_examination: 0,
            rows_clinicaldetection: 0,
            rows_doctor: 0,
            rows_prescription: 0,
            rows_medication: 0,
            rows_prescriptmed: 0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), GenError> {
        let fail = |msg: &str| Err(GenError::InconsistentSpec(msg.to_string()));
        if self.date_window_start > self.date_window_end {
            return fail("date_window_start is after date_window_end");
        }
        if self.date_window_end > self.reference_date {
            return fail("date_window_end is after reference_date");
        }
        if self.rows_patient == 0 {
            if self.rows_examination > 0 {
                return fail("examinations requested with zero patients");
            }
            if self.rows_clinicaldetection > 0 {
                return fail("clinical detections requested with zero patients");
            }
            if self.rows_prescription > 0 {
                return fail("prescriptions requested with zero patients");
            }
        }
        if self.rows_prescription > 0 && self.rows_doctor == 0 {
            return fail("prescriptions requested with zero doctors");
        }
        if self.rows_prescriptmed > 0 && (self.rows_prescription == 0 || self.rows_medication == 0)
        {
            return fail("prescriptmed rows requested without prescriptions or medications");
        }
        let capacity = self.rows_prescription.saturating_mul(self.rows_medication);
        if self.rows_prescriptmed > capacity {
            return fail("more prescriptmed rows than distinct (prescription, medication) pairs");
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
enum Stream {
    Patient = 0,
    Examination = 1,
    ClinicalDetection = 2,
    Doctor = 3,
    Prescription = 4,
    Medication = 5,
    PrescriptMed = 6,
}

fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

fn pick<'a, R: Rng>(rng: &mut R, pool: &[&'a str]) -> &'a str {
    pool[rng.gen_range(0..pool.len())]
}

fn date_in<R: Rng>(rng: &mut R, start: NaiveDate, end: NaiveDate) -> NaiveDate {
    let span = (end - start).num_days();
    start + Days::new(rng.gen_range(0..=span) as u64)
}

/// Age brackets used by the age-profile queries, as inclusive year ranges for
/// generation. The last bracket is open-ended in the queries.
const AGE_RANGES: [(u32, u32); 4] = [(0, 17), (18, 39), (40, 59), (60, 94)];

fn dob_for_age<R: Rng>(rng: &mut R, reference: NaiveDate, age: u32) -> NaiveDate {
    let anniversary = reference
        .checked_sub_months(Months::new(12 * age))
        .expect("age within calendar range");
    // Up to 364 days earlier keeps the completed-years age unchanged.
    anniversary - Days::new(rng.gen_range(0..=364))
}

/// Generate the full dataset described by `spec`.
pub fn generate_dataset(spec: &GenSpec) -> Result<ClinicalTables, GenError> {
    spec.validate()?;
    let patients = gen_patients(spec);
    let pids: Vec<i64> = patients.iter().map(|p| p.pid).collect();
    let examinations = gen_examinations(spec, &pids);
    let clinical_detections = gen_detections(spec, &pids);
    let doctors = gen_doctors(spec);
    let prescriptions = gen_prescriptions(spec, &pids, doctors.len());
    let medications = gen_medications(spec);
    let prescript_meds = gen_prescript_meds(spec);
    let tables = ClinicalTables::from_parts(TableParts {
        patients,
        examinations,
        clinical_detections,
        doctors,
        prescriptions,
        medications,
        prescript_meds,
    })?;
    Ok(tables)
}

fn gen_patients(spec: &GenSpec) -> Vec<PatientRecord> {
    let mut rng = stream(spec.seed, Stream::Patient);
    (0..spec.rows_patient)
        .map(|i| {
            // The first rows pin both genders and all four brackets.
            let gender = match i {
                0 => Gender::F,
                1 => Gender::M,
                _ if rng.gen_bool(0.5) => Gender::F,
                _ => Gender::M,
            };
            let bracket = if i < AGE_RANGES.len() {
                i
            } else {
                rng.gen_range(0..AGE_RANGES.len())
            };
            let (lo, hi) = AGE_RANGES[bracket];
            let age = rng.gen_range(lo..=hi);
            let dob = dob_for_age(&mut rng, spec.reference_date, age);
            let street_address = if rng.gen_bool(0.3) {
                format!(
                    "{} {}, Apt {}",
                    pick(&mut rng, pools::STREETS),
                    rng.gen_range(1..200),
                    rng.gen_range(1..40)
                )
            } else {
                format!(
                    "{} {}",
                    pick(&mut rng, pools::STREETS),
                    rng.gen_range(1..200)
                )
            };
            PatientRecord {
                pid: i as i64 + 1,
                name: pick(&mut rng, pools::GIVEN_NAMES).to_string(),
                surname: pick(&mut rng, pools::SURNAMES).to_string(),
                gender,
                dob,
                country: pick(&mut rng, pools::COUNTRIES).to_string(),
                street_address,
                city: pick(&mut rng, pools::CITIES).to_string(),
                postal: format!("{:05}", rng.gen_range(1000..100_000)),
            }
        })
        .collect()
}

fn gen_examinations(spec: &GenSpec, pids: &[i64]) -> Vec<ExaminationRecord> {
    let mut rng = stream(spec.seed, Stream::Examination);
    (0..spec.rows_examination)
        .map(|i| ExaminationRecord {
            report_id: i as i64 + 1,
            patient_id: pids[rng.gen_range(0..pids.len())],
            endoscopy_date: date_in(&mut rng, spec.date_window_start, spec.date_window_end),
            diagnoses_text: pick(&mut rng, pools::DIAGNOSES).to_string(),
        })
        .collect()
}

/// Detections come in per-patient visit sequences with `times` counting 1, 2,
/// 3. A seeded cohort of roughly [`HEPB_COHORT_RATE`] of the patients gets the
/// full three-visit sequence first; the remaining budget is spread over
/// random patients as sequences of one to three visits.
fn gen_detections(spec: &GenSpec, pids: &[i64]) -> Vec<ClinicalDetectionRecord> {
    let mut rng = stream(spec.seed, Stream::ClinicalDetection);
    let total = spec.rows_clinicaldetection;
    let mut rows = Vec::with_capacity(total);
    if total == 0 {
        return rows;
    }
    let cohort: Vec<i64> = pids
        .iter()
        .copied()
        .filter(|_| rng.gen_bool(HEPB_COHORT_RATE))
        .collect();

    let push_sequence = |rng: &mut ChaCha8Rng, rows: &mut Vec<_>, pid: i64, visits: u32| {
        let mut date = date_in(rng, spec.date_window_start, spec.date_window_end);
        for times in 1..=visits {
            rows.push(ClinicalDetectionRecord {
                detection_id: rows.len() as i64 + 1,
                patient_id: pid,
                times,
                hbsag: rng.gen_range(0..=1),
                antihbs: rng.gen_range(0..=1),
                detection_date: date.min(spec.reference_date),
            });
            date = date + Days::new(rng.gen_range(28..=180));
        }
    };

    for &pid in cohort.iter().take(total / 3) {
        push_sequence(&mut rng, &mut rows, pid, 3);
    }
    while rows.len() < total {
        let remaining = (total - rows.len()) as u32;
        let visits = rng.gen_range(1..=3).min(remaining);
        let pid = pids[rng.gen_range(0..pids.len())];
        push_sequence(&mut rng, &mut rows, pid, visits);
    }
    rows
}

pub const PINNED_DOCTOR: (&str, &str) = ("Tom", "Baker");

fn gen_doctors(spec: &GenSpec) -> Vec<DoctorRecord> {
    let mut rng = stream(spec.seed, Stream::Doctor);
    (0..spec.rows_doctor)
        .map(|i| {
            let (given, family) = if i == 0 {
                PINNED_DOCTOR
            } else {
                (
                    pick(&mut rng, pools::DOCTOR_GIVEN_NAMES),
                    pick(&mut rng, pools::DOCTOR_FAMILY_NAMES),
                )
            };
            DoctorRecord {
                doctor_id: i as i64 + 1,
                given_name: given.to_string(),
                family_name: family.to_string(),
            }
        })
        .collect()
}

fn gen_prescriptions(spec: &GenSpec, pids: &[i64], doctors: usize) -> Vec<PrescriptionRecord> {
    let mut rng = stream(spec.seed, Stream::Prescription);
    (0..spec.rows_prescription)
        .map(|i| PrescriptionRecord {
            prescription_id: i as i64 + 1,
            patient_id: pids[rng.gen_range(0..pids.len())],
            doctor_id: rng.gen_range(1..=doctors) as i64,
            prescription_date: date_in(&mut rng, spec.date_window_start, spec.date_window_end),
        })
        .collect()
}

/// Medication names come from the pool in order; past the pool size a
/// numeric suffix keeps names unique.
pub fn medication_name(index: usize) -> String {
    let pool = pools::MEDICATIONS;
    let base = pool[index % pool.len()];
    match index / pool.len() {
        0 => base.to_string(),
        round => format!("{base} {}", round + 1),
    }
}

fn gen_medications(spec: &GenSpec) -> Vec<MedicationRecord> {
    // The stream is reserved so future randomised fields do not shift others.
    let _rng = stream(spec.seed, Stream::Medication);
    (0..spec.rows_medication)
        .map(|i| MedicationRecord {
            medication_id: i as i64 + 1,
            medication_name: medication_name(i),
        })
        .collect()
}

/// Every prescription gets one medication while the budget lasts; the rest
/// are random distinct pairs, resolved by linear probing on collision.
fn gen_prescript_meds(spec: &GenSpec) -> Vec<PrescriptMedRecord> {
    let mut rng = stream(spec.seed, Stream::PrescriptMed);
    let total = spec.rows_prescriptmed;
    let prescriptions = spec.rows_prescription;
    let medications = spec.rows_medication;
    let mut seen: HashSet<(usize, usize)> = HashSet::with_capacity(total);
    let mut rows = Vec::with_capacity(total);
    let push = |rows: &mut Vec<PrescriptMedRecord>, p: usize, m: usize| {
        rows.push(PrescriptMedRecord {
            prescription_id: p as i64 + 1,
            medication_id: m as i64 + 1,
        });
    };
    for p in 0..prescriptions.min(total) {
        let m = rng.gen_range(0..medications);
        seen.insert((p, m));
        push(&mut rows, p, m);
    }
    let capacity = prescriptions * medications;
    while rows.len() < total {
        let start = rng.gen_range(0..prescriptions) * medications + rng.gen_range(0..medications);
        let mut slot = start;
        while seen.contains(&(slot / medications, slot % medications)) {
            slot = (slot + 1) % capacity;
        }
        let (p, m) = (slot / medications, slot % medications);
        seen.insert((p, m));
        push(&mut rows, p, m);
    }
    rows
}

/// Completed years between `dob` and `reference`; zero when `dob` is later.
pub fn age_on(dob: NaiveDate, reference: NaiveDate) -> u32 {
    reference.years_since(dob).unwrap_or(0)
}
