use std::collections::BTreeSet;

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use medshare_core::audit::{verify_bytes, AuditAction, AuditEvent, AuditLog, ChainStatus, Outcome};
use medshare_core::token::{issue_token, verify_token, SigningKey, TokenError};
use medshare_core::RbacStore;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const NOW: i64 = 1_700_000_000;

fn token() -> (String, SigningKey) {
    let mut rbac = RbacStore::default_fixture();
    rbac.set_digest_iterations(1_000);
    let roles = BTreeSet::from(["researcher".to_string()]);
    rbac.create_user("rita", "correct horse", &roles).unwrap();
    let key = SigningKey::new(vec![7u8; 32], "k1").unwrap();
    let token = issue_token("rita", "correct horse", NOW, 900, &key, &rbac).unwrap();
    (token, key)
}

#[test]
fn every_single_bit_tamper_is_a_bad_signature() {
    let (token, key) = token();
    assert!(verify_token(&token, NOW, &key).is_ok());
    let segments: Vec<Vec<u8>> = token
        .split('.')
        .map(|s| URL_SAFE_NO_PAD.decode(s).unwrap())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1_000 {
        let mut parts = segments.clone();
        let which = rng.gen_range(0..3);
        let byte = rng.gen_range(0..parts[which].len());
        parts[which][byte] ^= 1 << rng.gen_range(0..8);
        let forged = parts
            .iter()
            .map(|p| URL_SAFE_NO_PAD.encode(p))
            .collect::<Vec<_>>()
            .join(".");
        assert_eq!(
            verify_token(&forged, NOW, &key),
            Err(TokenError::BadSignature),
            "segment {which} byte {byte}"
        );
    }
}

#[test]
fn unsigned_token_is_rejected() {
    let (token, key) = token();
    let claims = token.split('.').nth(1).unwrap();
    let header = URL_SAFE_NO_PAD.encode(br#"{"alg":"none","typ":"JWT"}"#);
    for forged in [format!("{header}.{claims}."), format!("{header}.{claims}")] {
        assert!(verify_token(&forged, NOW, &key).is_err());
    }
    assert_eq!(
        verify_token(&format!("{header}.{claims}."), NOW, &key),
        Err(TokenError::BadSignature)
    );
}

fn log_bytes(entries: usize) -> Vec<u8> {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("audit.log");
    let mut log = AuditLog::open(&path).unwrap().durable(false);
    for i in 0..entries {
        let event = AuditEvent::new(
            "rita",
            "jti",
            AuditAction::QueryExecute,
            format!(
                "q1_exam_by_country end=2010-12-30 start=2010-01-0{}",
                i % 9 + 1
            ),
            Outcome::Ok,
        );
        log.append(event, 1_700_000_000_000 + i as i64).unwrap();
    }
    std::fs::read(&path).unwrap()
}

#[test]
fn random_byte_corruptions_break_the_chain() {
    let bytes = log_bytes(12);
    assert_eq!(verify_bytes(&bytes), ChainStatus::Intact { entries: 12 });
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let mut corrupt = bytes.clone();
        let at = rng.gen_range(0..corrupt.len());
        corrupt[at] ^= rng.gen_range(1..=255u8);
        assert!(
            matches!(verify_bytes(&corrupt), ChainStatus::Broken { .. }),
            "byte {at}"
        );
    }
}

#[test]
fn every_byte_flip_is_detected() {
    let bytes = log_bytes(3);
    for at in 0..bytes.len() {
        let mut corrupt = bytes.clone();
        corrupt[at] ^= 0x20;
        assert!(
            matches!(verify_bytes(&corrupt), ChainStatus::Broken { .. }),
            "byte {at}"
        );
    }
}

#[test]
fn deleting_any_middle_entry_is_detected() {
    let bytes = log_bytes(10);
    let lines: Vec<&[u8]> = bytes.split_inclusive(|&b| b == b'\n').collect();
    for skip in 1..lines.len() - 1 {
        let kept: Vec<u8> = lines
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != skip)
            .flat_map(|(_, l)| l.iter().copied())
            .collect();
        assert_eq!(
            verify_bytes(&kept),
            ChainStatus::Broken {
                seq: skip as u64 + 1
            }
        );
    }
}
