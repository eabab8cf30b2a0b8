use medshare_core::query::catalog::{Q1, Q6, Q7};
use medshare_core::query::BindError;
use medshare_core::{GuardConfig, QueryRegistry};
use medshare_testkit::injection_corpus;
use proptest::prelude::*;

fn registry() -> QueryRegistry {
    QueryRegistry::canonical(GuardConfig::default())
}

#[test]
fn corpus_is_rejected_in_every_parameter() {
    let corpus = injection_corpus();
    assert!(corpus.len() >= 50);
    let r = registry();
    for bad in &corpus {
        for (id, key) in [
            (Q1, "start"),
            (Q1, "end"),
            (Q6, "doctor_name"),
            (Q7, "medication"),
        ] {
            let mut params = vec![
                ("doctor_name", "Tom Baker"),
                ("medication", "Abilify"),
                ("start", "2010-01-01"),
                ("end", "2010-12-31"),
            ];
            if id == Q1 {
                params.retain(|(k, _)| *k == "start" || *k == "end");
            } else if id == Q6 {
                params.retain(|(k, _)| *k != "medication");
            } else {
                params.retain(|(k, _)| *k != "doctor_name");
            }
            for p in params.iter_mut() {
                if p.0 == key {
                    p.1 = bad;
                }
            }
            let err = r.bind(id, &params).unwrap_err();
            assert!(
                matches!(&err, BindError::BlockedInput { param, .. } if param == key),
                "{id} {key} {bad:?} -> {err:?}"
            );
            assert_eq!(err.code(), "input_blocked");
        }
    }
}

#[test]
fn blocked_undeclared_key_is_input_blocked() {
    let err = registry()
        .bind(
            Q1,
            &[
                ("start", "2010-01-01"),
                ("end", "2010-12-31"),
                ("name", "x"),
            ],
        )
        .unwrap_err();
    assert_eq!(err.code(), "input_blocked");
}

proptest! {
    #[test]
    fn any_value_with_a_forbidden_token_is_blocked(
        prefix in "[a-zA-Z0-9 ]{0,12}",
        token in prop::sample::select(vec!["'", "\"", ";", "\\", "--", "/*", "*/", "name", "AGE", "Address", "zipCode"]),
        suffix in "[a-zA-Z0-9 ]{0,12}",
    ) {
        let value = format!("{prefix}{token}{suffix}");
        let err = registry().bind(Q6, &[("doctor_name", value.as_str()), ("start", "2010-01-01"), ("end", "2010-12-31")]).unwrap_err();
        prop_assert_eq!(err.code(), "input_blocked");
    }

    #[test]
    fn bind_never_panics(key in ".{0,10}", value in ".{0,40}") {
        let _ = registry().bind(Q7, &[(key.as_str(), value.as_str())]);
    }
}
