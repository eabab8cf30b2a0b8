use std::time::{Duration, Instant};

use medshare_core::store::{load_tables, save_tables};
use medshare_core::synth::{generate_dataset, GenSpec};

#[test]
fn default_spec_row_counts() {
    let started = Instant::now();
    let t = generate_dataset(&GenSpec::default()).unwrap();
    assert!(started.elapsed() < Duration::from_secs(10));
    assert_eq!(
        t.row_counts(),
        [1_881, 2_020, 6_393, 912, 3_856, 100, 8_801]
    );
    assert_eq!(
        t.patients().len() + t.examinations().len() + t.clinical_detections().len(),
        10_294
    );
}

#[test]
fn same_seed_same_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    save_tables(&generate_dataset(&GenSpec::with_seed(7)).unwrap(), a.path()).unwrap();
    save_tables(&generate_dataset(&GenSpec::with_seed(7)).unwrap(), b.path()).unwrap();
    for file in medshare_core::store::TABLE_FILES {
        let x = std::fs::read(a.path().join(file)).unwrap();
        let y = std::fs::read(b.path().join(file)).unwrap();
        assert_eq!(x, y, "{file}");
    }
}

#[test]
fn different_seeds_differ() {
    let a = generate_dataset(&GenSpec::with_seed(1)).unwrap();
    let b = generate_dataset(&GenSpec::with_seed(2)).unwrap();
    assert_ne!(a.patients(), b.patients());
}

#[test]
fn save_then_load_is_identity() {
    let t = generate_dataset(&GenSpec::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_tables(&t, dir.path()).unwrap();
    assert_eq!(load_tables(dir.path()).unwrap(), t);
}

#[test]
fn growing_one_table_leaves_others_alone() {
    let base = GenSpec::with_seed(99);
    let more_doctors = GenSpec {
        rows_doctor: base.rows_doctor + 50,
        ..base.clone()
    };
    let a = generate_dataset(&base).unwrap();
    let b = generate_dataset(&more_doctors).unwrap();
    assert_eq!(a.patients(), b.patients());
    assert_eq!(a.examinations(), b.examinations());
    assert_eq!(a.medications(), b.medications());
    assert_eq!(&b.doctors()[..a.doctors().len()], a.doctors());
}
