//! Input and schema screening applied before any other processing.
//!
//! Two checks run on every externally supplied string: the de-identification
//! check rejects text mentioning an identifying attribute, the injection check
//! rejects text carrying a query-language metacharacter. Matching is plain
//! substring search, so the checks over-block (`"surname"` contains `"name"`,
//! `"storage"` contains `"age"`). That is the intended fail-closed behaviour.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_BLOCKLIST: [&str; 4] = ["name", "age", "address", "zipcode"];
pub const DEFAULT_ANTI_INJECTION: [&str; 7] = ["'", "\"", ";", "\\", "--", "/*", "*/"];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GuardConfigError {
    #[error("blocklist must not be empty")]
    EmptyBlocklist,
    #[error("anti-injection list must not be empty")]
    EmptyAntiInjection,
    #[error("guard entries must be non-empty strings")]
    EmptyEntry,
}

/// Why an input was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockReason {
    Deidentification,
    Injection,
}

impl BlockReason {
    pub fn as_str(self) -> &'static str {
        match self {
            BlockReason::Deidentification => "deidentification",
            BlockReason::Injection => "injection",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GuardConfig {
    blocklist: BTreeSet<String>,
    anti_injection: BTreeSet<String>,
}

impl Default for GuardConfig {
    fn default() -> Self {
        Self {
            blocklist: DEFAULT_BLOCKLIST.iter().map(|s| s.to_string()).collect(),
            anti_injection: DEFAULT_ANTI_INJECTION
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }
}

impl GuardConfig {
    /// Blocklist tokens are lowercased on the way in.
    pub fn new<B, A>(blocklist: B, anti_injection: A) -> Result<Self, GuardConfigError>
    where
        B: IntoIterator,
        B::Item: AsRef<str>,
        A: IntoIterator,
        A::Item: AsRef<str>,
    {
        let blocklist: BTreeSet<String> = blocklist
            .into_iter()
            .map(|s| s.as_ref().to_lowercase())
            .collect();
        let anti_injection: BTreeSet<String> = anti_injection
            .into_iter()
            .map(|s| s.as_ref().to_string())
            .collect();
        if blocklist.is_empty() {
            return Err(GuardConfigError::EmptyBlocklist);
        }
        if anti_injection.is_empty() {
            return Err(GuardConfigError::EmptyAntiInjection);
        }
        if blocklist
            .iter()
            .chain(&anti_injection)
            .any(String::is_empty)
        {
            return Err(GuardConfigError::EmptyEntry);
        }
        Ok(Self {
            blocklist,
            anti_injection,
        })
    }

    pub fn blocklist(&self) -> impl Iterator<Item = &str> {
        self.blocklist.iter().map(String::as_str)
    }

    pub fn anti_injection(&self) -> impl Iterator<Item = &str> {
        self.anti_injection.iter().map(String::as_str)
    }

    /// The first failing check for `s`, de-identification first.
    pub fn screen(&self, s: &str) -> Option<BlockReason> {
        if !check_deidentification(s, self) {
            Some(BlockReason::Deidentification)
        } else if !check_injection(s, self) {
            Some(BlockReason::Injection)
        } else {
            None
        }
    }

    pub fn accepts(&self, s: &str) -> bool {
        self.screen(s).is_none()
    }
}

/// `false` iff the lowercased input contains a blocklist token.
pub fn check_deidentification(s: &str, cfg: &GuardConfig) -> bool {
    let lowered = s.to_lowercase();
    !cfg.blocklist
        .iter()
        .any(|token| lowered.contains(token.as_str()))
}

/// `false` iff the input contains any anti-injection character or sequence.
pub fn check_injection(s: &str, cfg: &GuardConfig) -> bool {
    !cfg.anti_injection
        .iter()
        .any(|seq| s.contains(seq.as_str()))
}

/// `false` iff any column label fails the de-identification check.
pub fn screen_output_schema<S: AsRef<str>>(columns: &[S], cfg: &GuardConfig) -> bool {
    columns
        .iter()
        .all(|c| check_deidentification(c.as_ref(), cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn deidentification_examples() {
        let cfg = GuardConfig::default();
        assert!(check_deidentification("2010-01-01", &cfg));
        assert!(!check_deidentification("patient name", &cfg));
        assert!(!check_deidentification("zipcode=71344", &cfg));
        assert!(!check_deidentification("Home ADDRESS", &cfg));
        assert!(!check_deidentification("storage", &cfg));
        assert!(check_deidentification("", &cfg));
    }

    #[test]
    fn injection_examples() {
        let cfg = GuardConfig::default();
        assert!(check_injection("Hungary", &cfg));
        assert!(!check_injection("x' OR '1'='1", &cfg));
        assert!(!check_injection("1; DROP TABLE patient", &cfg));
        assert!(!check_injection("a /* b", &cfg));
        assert!(!check_injection("back\\slash", &cfg));
        assert!(check_injection("", &cfg));
    }

    #[test]
    fn split_dash_sequence_is_only_caught_when_joined() {
        let cfg = GuardConfig::default();
        assert!(check_injection("-", &cfg));
        assert!(!check_injection(&format!("{}{}", "-", "-"), &cfg));
    }

    #[test]
    fn output_schema_screening() {
        let cfg = GuardConfig::default();
        assert!(screen_output_schema(&["Country", "TotalNum"], &cfg));
        assert!(!screen_output_schema(&["surname", "count"], &cfg));
        assert!(!screen_output_schema(&["name", "count"], &cfg));
        assert!(screen_output_schema::<&str>(&[], &cfg));
    }

    #[test]
    fn config_rejects_empty_sets_and_lowercases() {
        assert_eq!(
            GuardConfig::new(Vec::<String>::new(), ["'"]),
            Err(GuardConfigError::EmptyBlocklist)
        );
        assert_eq!(
            GuardConfig::new(["name"], Vec::<String>::new()),
            Err(GuardConfigError::EmptyAntiInjection)
        );
        assert_eq!(
            GuardConfig::new([""], ["'"]),
            Err(GuardConfigError::EmptyEntry)
        );
        let cfg = GuardConfig::new(["SSN"], ["'"]).unwrap();
        assert!(!check_deidentification("my ssn", &cfg));
    }

    proptest! {
        #[test]
        fn blocked_input_stays_blocked_in_any_superstring(
            prefix in ".{0,12}",
            core in prop::sample::select(vec!["name", "AGE", "Address", "zipCode"]),
            suffix in ".{0,12}",
        ) {
            let cfg = GuardConfig::default();
            prop_assert!(!check_deidentification(core, &cfg));
            let s = format!("{prefix}{core}{suffix}");
            prop_assert!(!check_deidentification(&s, &cfg));
        }

        #[test]
        fn checks_are_total(s in any::<String>()) {
            let cfg = GuardConfig::default();
            let _ = check_deidentification(&s, &cfg);
            let _ = check_injection(&s, &cfg);
        }
    }
}
