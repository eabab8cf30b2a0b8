//! Compact HMAC-SHA256 signed tokens (JWT, `HS256` only).
//!
//! Nothing here reads the clock: `now` is always passed in, in whole seconds
//! since the Unix epoch.

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use hmac::{Hmac, Mac};
use serde::{Deserialize, Serialize};
use sha2::Sha256;
use thiserror::Error;

use crate::rbac::{AuthError, RbacStore};

type HmacSha256 = Hmac<Sha256>;

pub const ALGORITHM: &str = "HS256";
pub const MIN_SECRET_LEN: usize = 32;
pub const DEFAULT_TTL_SECS: i64 = 900;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claims {
    pub sub: String,
    pub roles: Vec<String>,
    pub iat: i64,
    pub exp: i64,
    pub jti: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Header {
    alg: String,
    typ: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kid: Option<String>,
}

#[derive(Clone)]
pub struct SigningKey {
    secret: Vec<u8>,
    key_id: String,
}

impl std::fmt::Debug for SigningKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SigningKey")
            .field("key_id", &self.key_id)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum KeyError {
    #[error("signing secret must be at least {MIN_SECRET_LEN} bytes, got {0}")]
    TooShort(usize),
}

impl SigningKey {
    pub fn new(secret: impl Into<Vec<u8>>, key_id: impl Into<String>) -> Result<Self, KeyError> {
        let secret = secret.into();
        if secret.len() < MIN_SECRET_LEN {
            return Err(KeyError::TooShort(secret.len()));
        }
        Ok(Self {
            secret,
            key_id: key_id.into(),
        })
    }

    pub fn key_id(&self) -> &str {
        &self.key_id
    }

    fn mac(&self) -> HmacSha256 {
        HmacSha256::new_from_slice(&self.secret).expect("HMAC accepts any key length")
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum TokenError {
    #[error("malformed token")]
    Malformed,
    #[error("token signature does not verify")]
    BadSignature,
    #[error("token expired")]
    Expired,
}

impl TokenError {
    pub fn code(self) -> &'static str {
        match self {
            TokenError::Malformed => "malformed_token",
            TokenError::BadSignature => "bad_signature",
            TokenError::Expired => "expired_token",
        }
    }
}

#[derive(Debug, Error)]
pub enum IssueError {
    #[error(transparent)]
    Auth(#[from] AuthError),
    #[error("ttl must be positive")]
    BadTtl,
}

/// Verification options. `leeway_secs` extends the expiry instant.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct VerifyOptions {
    pub leeway_secs: i64,
}

/// Sign `claims` into the three-segment compact form.
pub fn encode(claims: &Claims, key: &SigningKey) -> String {
    let header = Header {
        alg: ALGORITHM.to_string(),
        typ: "JWT".to_string(),
        kid: Some(key.key_id.clone()),
    };
    let header = URL_SAFE_NO_PAD.encode(serde_json::to_vec(&header).expect("header serializes"));
    let payload = URL_SAFE_NO_PAD.encode(serde_json::to_vec(claims).expect("claims serialize"));
    let signing_input = format!("{header}.{payload}");
    let mut mac = key.mac();
    mac.update(signing_input.as_bytes());
    let signature = URL_SAFE_NO_PAD.encode(mac.finalize().into_bytes());
    format!("{signing_input}.{signature}")
}

/// Authenticate `username`/`password` against `accounts` and issue a token
/// valid for `[now, now + ttl_secs)`.
pub fn issue_token(
    username: &str,
    password: &str,
    now: i64,
    ttl_secs: i64,
    key: &SigningKey,
    accounts: &RbacStore,
) -> Result<String, IssueError> {
    if ttl_secs <= 0 {
        return Err(IssueError::BadTtl);
    }
    let account = accounts.authenticate(username, password)?;
    let claims = Claims {
        sub: account.username.clone(),
        roles: account.roles.iter().cloned().collect(),
        iat: now,
        exp: now + ttl_secs,
        jti: uuid::Uuid::new_v4().to_string(),
    };
    Ok(encode(&claims, key))
}

/// Check structure, then signature, then expiry.
///
/// The signature is checked over the raw signing input before either JSON
/// segment is interpreted, so any alteration of the header or claims bytes
/// surfaces as [`TokenError::BadSignature`]. The header must then name
/// `HS256`; anything else (including `none`) is also a bad signature.
pub fn verify_token(token: &str, now: i64, key: &SigningKey) -> Result<Claims, TokenError> {
    verify_token_with(token, now, key, VerifyOptions::default())
}

pub fn verify_token_with(
    token: &str,
    now: i64,
    key: &SigningKey,
    opts: VerifyOptions,
) -> Result<Claims, TokenError> {
    let mut parts = token.split('.');
    let (Some(h), Some(c), Some(s), None) =
        (parts.next(), parts.next(), parts.next(), parts.next())
    else {
        return Err(TokenError::Malformed);
    };
    let decode = |seg: &str| {
        URL_SAFE_NO_PAD
            .decode(seg)
            .map_err(|_| TokenError::Malformed)
    };
    let header_bytes = decode(h)?;
    let claims_bytes = decode(c)?;
    let signature = decode(s)?;

    let mut mac = key.mac();
    mac.update(h.as_bytes());
    mac.update(b".");
    mac.update(c.as_bytes());
    mac.verify_slice(&signature)
        .map_err(|_| TokenError::BadSignature)?;

    let header: Header =
        serde_json::from_slice(&header_bytes).map_err(|_| TokenError::Malformed)?;
    if header.alg != ALGORITHM {
        return Err(TokenError::BadSignature);
    }
    let claims: Claims =
        serde_json::from_slice(&claims_bytes).map_err(|_| TokenError::Malformed)?;
    if claims.exp <= claims.iat {
        return Err(TokenError::Malformed);
    }
    if now >= claims.exp.saturating_add(opts.leeway_secs) {
        return Err(TokenError::Expired);
    }
    Ok(claims)
}

/// Decode the claims segment without any verification. For display only.
pub fn peek_claims(token: &str) -> Option<Claims> {
    let payload = token.split('.').nth(1)?;
    serde_json::from_slice(&URL_SAFE_NO_PAD.decode(payload).ok()?).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rbac::RbacStore;
    use std::collections::BTreeSet;

    fn key(byte: u8) -> SigningKey {
        SigningKey::new(vec![byte; 32], "k1").unwrap()
    }

    fn accounts() -> RbacStore {
        let mut store = RbacStore::default_fixture();
        store.set_digest_iterations(1_000);
        store
            .create_user(
                "alice",
                "s3cret",
                &BTreeSet::from(["administrator".to_string()]),
            )
            .unwrap();
        store
    }

    #[test]
    fn short_secret_is_rejected() {
        assert_eq!(
            SigningKey::new(vec![0; 31], "k").unwrap_err(),
            KeyError::TooShort(31)
        );
    }

    #[test]
    fn issue_and_verify_round_trip() {
        let store = accounts();
        let k = key(7);
        let token = issue_token("alice", "s3cret", 1_000, 900, &k, &store).unwrap();
        let claims = verify_token(&token, 1_001, &k).unwrap();
        assert_eq!(claims.sub, "alice");
        assert_eq!(claims.exp - claims.iat, 900);
        assert_eq!(claims.roles, vec!["administrator".to_string()]);
        assert_eq!(verify_token(&token, 1_899, &k).unwrap(), claims);
        assert_eq!(verify_token(&token, 1_900, &k), Err(TokenError::Expired));
        assert_eq!(verify_token(&token, 1_901, &k), Err(TokenError::Expired));
        let lenient = VerifyOptions { leeway_secs: 5 };
        assert!(verify_token_with(&token, 1_901, &k, lenient).is_ok());
    }

    #[test]
    fn wrong_password_and_unknown_user_are_indistinguishable() {
        let store = accounts();
        let k = key(7);
        let wrong = issue_token("alice", "nope", 0, 900, &k, &store).unwrap_err();
        let unknown = issue_token("mallory", "s3cret", 0, 900, &k, &store).unwrap_err();
        assert_eq!(wrong.to_string(), unknown.to_string());
        assert!(matches!(wrong, IssueError::Auth(AuthError::BadCredentials)));
        assert!(matches!(
            issue_token("alice", "s3cret", 0, 0, &k, &store),
            Err(IssueError::BadTtl)
        ));
    }

    #[test]
    fn successive_tokens_have_fresh_ids() {
        let store = accounts();
        let k = key(7);
        let a = issue_token("alice", "s3cret", 0, 900, &k, &store).unwrap();
        let b = issue_token("alice", "s3cret", 0, 900, &k, &store).unwrap();
        assert_ne!(peek_claims(&a).unwrap().jti, peek_claims(&b).unwrap().jti);
    }

    #[test]
    fn other_key_does_not_verify() {
        let store = accounts();
        let token = issue_token("alice", "s3cret", 0, 900, &key(7), &store).unwrap();
        assert_eq!(
            verify_token(&token, 1, &key(8)),
            Err(TokenError::BadSignature)
        );
    }

    #[test]
    fn structural_errors() {
        let k = key(1);
        for bad in ["", "a.b", "a.b.c.d", "!!.e30.AA", "e30.e30.@@"] {
            assert_eq!(
                verify_token(bad, 0, &k),
                Err(TokenError::Malformed),
                "{bad}"
            );
        }
    }

    #[test]
    fn alg_none_is_rejected() {
        let k = key(1);
        let claims = Claims {
            sub: "alice".into(),
            roles: vec!["administrator".into()],
            iat: 0,
            exp: 100,
            jti: "x".into(),
        };
        let header = URL_SAFE_NO_PAD.encode(br#"{"alg":"none","typ":"JWT"}"#);
        let payload = URL_SAFE_NO_PAD.encode(serde_json::to_vec(&claims).unwrap());
        let unsigned = format!("{header}.{payload}.");
        assert_eq!(
            verify_token(&unsigned, 1, &k),
            Err(TokenError::BadSignature)
        );
    }
}
