//! Role-based access control: users hold roles, roles are granted queries.
//!
//! State lives in one versioned TOML file (see [`RbacStore::save`]). Password
//! digests are PBKDF2-HMAC-SHA256 strings of the form
//! `pbkdf2-sha256$<iterations>$<salt hex>$<hash hex>`.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::Sha256;
use subtle::ConstantTimeEq;
use thiserror::Error;

use crate::query::catalog::{CANONICAL_IDS, Q1, Q2, Q3, Q4};

pub const FILE_VERSION: u32 = 1;
pub const DEFAULT_DIGEST_ITERATIONS: u32 = 10_000;
const SALT_LEN: usize = 16;
const HASH_LEN: usize = 32;
const DIGEST_SCHEME: &str = "pbkdf2-sha256";

pub const ADMINISTRATOR: &str = "administrator";
pub const ORGANIZATION_A: &str = "organization_a";
pub const RESEARCHER: &str = "researcher";

#[derive(Debug, Error)]
pub enum RbacError {
    #[error("user {0} already exists")]
    DuplicateUser(String),
    #[error("role {0} already exists")]
    DuplicateRole(String),
    #[error("unknown role {0}")]
    UnknownRole(String),
    #[error("unknown query {0}")]
    UnknownQuery(String),
    #[error("unknown user {0}")]
    UnknownUser(String),
    #[error("password must not be empty")]
    EmptyPassword,
    #[error("username must not be empty")]
    EmptyUsername,
    #[error("i/o failure on {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid RBAC file {path}: {reason}")]
    InvalidFile { path: PathBuf, reason: String },
}

impl RbacError {
    pub fn code(&self) -> &'static str {
        match self {
            RbacError::DuplicateUser(_) => "duplicate_user",
            RbacError::DuplicateRole(_) => "duplicate_role",
            RbacError::UnknownRole(_) => "unknown_role",
            RbacError::UnknownQuery(_) => "unknown_query",
            RbacError::UnknownUser(_) => "unknown_user",
            RbacError::EmptyPassword => "empty_password",
            RbacError::EmptyUsername => "empty_username",
            RbacError::IoFailure { .. } => "io_failure",
            RbacError::InvalidFile { .. } => "invalid_rbac_file",
        }
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum AuthError {
    #[error("bad credentials")]
    BadCredentials,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserAccount {
    pub username: String,
    pub password_digest: String,
    pub roles: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct QueryGrant {
    pub role: String,
    pub query: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RbacFile {
    version: u32,
    digest_iterations: u32,
    roles: Vec<String>,
    #[serde(default)]
    users: Vec<UserAccount>,
    #[serde(default)]
    grants: Vec<QueryGrant>,
}

/// Users, roles and grants, validated against a fixed set of query ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RbacStore {
    known_queries: BTreeSet<String>,
    roles: BTreeSet<String>,
    users: BTreeMap<String, UserAccount>,
    grants: BTreeSet<(String, String)>,
    digest_iterations: u32,
    /// Verified against when the username is unknown, so both failure paths
    /// cost one key derivation.
    decoy_digest: String,
}

impl RbacStore {
    pub fn new<I, S>(known_queries: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            known_queries: known_queries.into_iter().map(Into::into).collect(),
            roles: BTreeSet::new(),
            users: BTreeMap::new(),
            grants: BTreeSet::new(),
            digest_iterations: DEFAULT_DIGEST_ITERATIONS,
            decoy_digest: digest_password("decoy", &[0u8; SALT_LEN], DEFAULT_DIGEST_ITERATIONS),
        }
    }

    /// Roles `administrator`, `organization_a` and `researcher` with their
    /// standard grants over the canonical queries, and no users.
    pub fn default_fixture() -> Self {
        let mut store = Self::new(CANONICAL_IDS);
        for role in [ADMINISTRATOR, ORGANIZATION_A, RESEARCHER] {
            store.add_role(role).expect("fresh role");
        }
        for q in CANONICAL_IDS {
            store.grant(ADMINISTRATOR, q).expect("known grant");
        }
        for q in [Q2, Q3] {
            store.grant(ORGANIZATION_A, q).expect("known grant");
        }
        for q in [Q1, Q2, Q3, Q4] {
            store.grant(RESEARCHER, q).expect("known grant");
        }
        store
    }

    pub fn digest_iterations(&self) -> u32 {
        self.digest_iterations
    }

    /// Iteration count used for digests created from now on.
    pub fn set_digest_iterations(&mut self, iterations: u32) {
        let iterations = iterations.max(1);
        self.digest_iterations = iterations;
        self.decoy_digest = digest_password("decoy", &[0u8; SALT_LEN], iterations);
    }

    pub fn add_role(&mut self, role: &str) -> Result<(), RbacError> {
        if !self.roles.insert(role.to_string()) {
            return Err(RbacError::DuplicateRole(role.to_string()));
        }
        Ok(())
    }

    pub fn roles(&self) -> impl Iterator<Item = &str> {
        self.roles.iter().map(String::as_str)
    }

    pub fn users(&self) -> impl Iterator<Item = &UserAccount> {
        self.users.values()
    }

    pub fn user(&self, username: &str) -> Option<&UserAccount> {
        self.users.get(username)
    }

    pub fn grants(&self) -> impl Iterator<Item = (&str, &str)> {
        self.grants.iter().map(|(r, q)| (r.as_str(), q.as_str()))
    }

    pub fn create_user(
        &mut self,
        username: &str,
        password: &str,
        roles: &BTreeSet<String>,
    ) -> Result<&UserAccount, RbacError> {
        if username.is_empty() {
            return Err(RbacError::EmptyUsername);
        }
        if self.users.contains_key(username) {
            return Err(RbacError::DuplicateUser(username.to_string()));
        }
        if let Some(role) = roles.iter().find(|r| !self.roles.contains(*r)) {
            return Err(RbacError::UnknownRole(role.clone()));
        }
        if password.is_empty() {
            return Err(RbacError::EmptyPassword);
        }
        let mut salt = [0u8; SALT_LEN];
        rand::thread_rng().fill_bytes(&mut salt);
        let account = UserAccount {
            username: username.to_string(),
            password_digest: digest_password(password, &salt, self.digest_iterations),
            roles: roles.clone(),
        };
        Ok(self.users.entry(username.to_string()).or_insert(account))
    }

    fn check_grant_target(&self, role: &str, query_id: &str) -> Result<(), RbacError> {
        if !self.roles.contains(role) {
            return Err(RbacError::UnknownRole(role.to_string()));
        }
        if !self.known_queries.contains(query_id) {
            return Err(RbacError::UnknownQuery(query_id.to_string()));
        }
        Ok(())
    }

    pub fn grant(&mut self, role: &str, query_id: &str) -> Result<(), RbacError> {
        self.check_grant_target(role, query_id)?;
        self.grants.insert((role.to_string(), query_id.to_string()));
        Ok(())
    }

    /// Removing an absent grant is a no-op.
    pub fn revoke(&mut self, role: &str, query_id: &str) -> Result<(), RbacError> {
        self.check_grant_target(role, query_id)?;
        self.grants
            .remove(&(role.to_string(), query_id.to_string()));
        Ok(())
    }

    /// Union of the grants held by any of `roles`.
    pub fn permitted_queries<S: AsRef<str>>(&self, roles: &[S]) -> BTreeSet<String> {
        self.grants
            .iter()
            .filter(|(role, _)| roles.iter().any(|r| r.as_ref() == role))
            .map(|(_, q)| q.clone())
            .collect()
    }

    pub fn check_permission<S: AsRef<str>>(&self, roles: &[S], query_id: &str) -> bool {
        roles.iter().any(|r| {
            self.grants
                .contains(&(r.as_ref().to_string(), query_id.to_string()))
        })
    }

    /// Verify a password. Unknown users and wrong passwords take the same
    /// path and return the same error.
    pub fn authenticate(&self, username: &str, password: &str) -> Result<&UserAccount, AuthError> {
        let account = self.users.get(username);
        let digest = account
            .map(|a| a.password_digest.as_str())
            .unwrap_or(&self.decoy_digest);
        let matches = verify_password(password, digest);
        match account {
            Some(a) if matches => Ok(a),
            _ => Err(AuthError::BadCredentials),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RbacError> {
        Self::load_with_queries(path, CANONICAL_IDS)
    }

    pub fn load_with_queries<I, S>(
        path: impl AsRef<Path>,
        known_queries: I,
    ) -> Result<Self, RbacError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| RbacError::IoFailure {
            path: path.to_path_buf(),
            source,
        })?;
        let invalid = |reason: String| RbacError::InvalidFile {
            path: path.to_path_buf(),
            reason,
        };
        let file: RbacFile = toml::from_str(&text).map_err(|e| invalid(e.to_string()))?;
        if file.version != FILE_VERSION {
            return Err(invalid(format!("unsupported version {}", file.version)));
        }
        let mut store = Self::new(known_queries);
        store.set_digest_iterations(file.digest_iterations);
        for role in &file.roles {
            store.add_role(role).map_err(|e| invalid(e.to_string()))?;
        }
        for g in &file.grants {
            store
                .grant(&g.role, &g.query)
                .map_err(|e| invalid(e.to_string()))?;
        }
        for user in file.users {
            if store.users.contains_key(&user.username) {
                return Err(invalid(format!("duplicate user {}", user.username)));
            }
            if let Some(role) = user.roles.iter().find(|r| !store.roles.contains(*r)) {
                return Err(invalid(format!(
                    "user {} has unknown role {role}",
                    user.username
                )));
            }
            if parse_digest(&user.password_digest).is_none() {
                return Err(invalid(format!(
                    "user {} has a malformed digest",
                    user.username
                )));
            }
            store.users.insert(user.username.clone(), user);
        }
        Ok(store)
    }

    /// Load `path`, or start from [`RbacStore::default_fixture`] when the file
    /// does not exist yet.
    pub fn load_or_default(path: impl AsRef<Path>) -> Result<Self, RbacError> {
        let path = path.as_ref();
        if path.exists() {
            Self::load(path)
        } else {
            Ok(Self::default_fixture())
        }
    }

    /// Rewrite `path` atomically (temporary file in the same directory, then
    /// rename).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RbacError> {
        let path = path.as_ref();
        let file = RbacFile {
            version: FILE_VERSION,
            digest_iterations: self.digest_iterations,
            roles: self.roles.iter().cloned().collect(),
            users: self.users.values().cloned().collect(),
            grants: self
                .grants
                .iter()
                .map(|(role, query)| QueryGrant {
                    role: role.clone(),
                    query: query.clone(),
                })
                .collect(),
        };
        let text = toml::to_string_pretty(&file).expect("RBAC state serializes");
        let io_err = |source| RbacError::IoFailure {
            path: path.to_path_buf(),
            source,
        };
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        let file_name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "rbac".to_string());
        let tmp = dir.join(format!(".{file_name}.tmp{}", std::process::id()));
        let mut out = std::fs::File::create(&tmp).map_err(io_err)?;
        out.write_all(text.as_bytes()).map_err(io_err)?;
        out.sync_all().map_err(io_err)?;
        drop(out);
        std::fs::rename(&tmp, path).map_err(io_err)
    }
}

fn derive(password: &str, salt: &[u8], iterations: u32) -> [u8; HASH_LEN] {
    let mut out = [0u8; HASH_LEN];
    pbkdf2::pbkdf2_hmac::<Sha256>(password.as_bytes(), salt, iterations, &mut out);
    out
}

fn digest_password(password: &str, salt: &[u8], iterations: u32) -> String {
    format!(
        "{DIGEST_SCHEME}${iterations}${}${}",
        hex::encode(salt),
        hex::encode(derive(password, salt, iterations))
    )
}

fn parse_digest(digest: &str) -> Option<(u32, Vec<u8>, Vec<u8>)> {
    let mut parts = digest.split('$');
    if parts.next()? != DIGEST_SCHEME {
        return None;
    }
    let iterations: u32 = parts.next()?.parse().ok().filter(|&n| n > 0)?;
    let salt = hex::decode(parts.next()?).ok()?;
    let hash = hex::decode(parts.next()?).ok()?;
    if parts.next().is_some() || hash.len() != HASH_LEN {
        return None;
    }
    Some((iterations, salt, hash))
}

fn verify_password(password: &str, digest: &str) -> bool {
    match parse_digest(digest) {
        Some((iterations, salt, expected)) => derive(password, &salt, iterations)
            .ct_eq(&expected[..])
            .into(),
        None => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::catalog::{Q5, Q8};
    use proptest::prelude::*;

    fn roles(names: &[&str]) -> BTreeSet<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn fast_store() -> RbacStore {
        let mut s = RbacStore::default_fixture();
        s.set_digest_iterations(100);
        s
    }

    #[test]
    fn create_users() {
        let mut s = fast_store();
        let alice = s
            .create_user("alice", "s3cret", &roles(&[ADMINISTRATOR]))
            .unwrap();
        assert_eq!(alice.roles.len(), 1);
        assert!(!alice.password_digest.contains("s3cret"));
        assert!(matches!(
            s.create_user("alice", "x", &roles(&[])),
            Err(RbacError::DuplicateUser(_))
        ));
        let bob = s
            .create_user("bob", "pw", &roles(&[ORGANIZATION_A, RESEARCHER]))
            .unwrap();
        assert_eq!(bob.roles.len(), 2);
        assert!(matches!(
            s.create_user("carol", "pw", &roles(&["janitor"])),
            Err(RbacError::UnknownRole(_))
        ));
        assert!(matches!(
            s.create_user("dave", "", &roles(&[])),
            Err(RbacError::EmptyPassword)
        ));
    }

    #[test]
    fn default_grants() {
        let s = RbacStore::default_fixture();
        assert_eq!(s.permitted_queries(&[ADMINISTRATOR]).len(), 8);
        assert_eq!(
            s.permitted_queries(&[ORGANIZATION_A]),
            BTreeSet::from([Q2.to_string(), Q3.to_string()])
        );
        assert_eq!(
            s.permitted_queries(&[ORGANIZATION_A, ADMINISTRATOR]).len(),
            8
        );
        assert!(s.permitted_queries::<&str>(&[]).is_empty());
        assert!(!s.check_permission::<&str>(&[], Q1));
        assert!(s.check_permission(&[ADMINISTRATOR], Q5));
        assert!(!s.check_permission(&[ORGANIZATION_A], Q4));
    }

    #[test]
    fn grant_and_revoke() {
        let mut s = fast_store();
        s.revoke(ORGANIZATION_A, Q8).unwrap();
        s.grant(ORGANIZATION_A, Q8).unwrap();
        assert!(s.check_permission(&[ORGANIZATION_A], Q8));
        s.revoke(ORGANIZATION_A, Q8).unwrap();
        assert!(!s.check_permission(&[ORGANIZATION_A], Q8));
        assert!(matches!(
            s.grant("nobody", Q1),
            Err(RbacError::UnknownRole(_))
        ));
        assert!(matches!(
            s.grant(ADMINISTRATOR, "q9_everything"),
            Err(RbacError::UnknownQuery(_))
        ));
    }

    #[test]
    fn authenticate() {
        let mut s = fast_store();
        s.create_user("alice", "s3cret", &roles(&[ADMINISTRATOR]))
            .unwrap();
        assert_eq!(s.authenticate("alice", "s3cret").unwrap().username, "alice");
        assert_eq!(
            s.authenticate("alice", "S3cret"),
            Err(AuthError::BadCredentials)
        );
        assert_eq!(
            s.authenticate("nobody", "s3cret"),
            Err(AuthError::BadCredentials)
        );
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rbac.toml");
        let mut s = fast_store();
        s.create_user("alice", "s3cret", &roles(&[ADMINISTRATOR]))
            .unwrap();
        s.save(&path).unwrap();
        let loaded = RbacStore::load(&path).unwrap();
        assert_eq!(loaded.users().count(), 1);
        assert_eq!(loaded.digest_iterations(), 100);
        assert_eq!(loaded.permitted_queries(&[RESEARCHER]).len(), 4);
        assert!(loaded.authenticate("alice", "s3cret").is_ok());
        assert_eq!(loaded, s);
    }

    #[test]
    fn invalid_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rbac.toml");
        std::fs::write(&path, "version = 2\ndigest_iterations = 1\nroles = []\n").unwrap();
        assert!(matches!(
            RbacStore::load(&path),
            Err(RbacError::InvalidFile { .. })
        ));
        std::fs::write(
            &path,
            "version = 1\ndigest_iterations = 1\nroles = [\"a\"]\n[[grants]]\nrole = \"b\"\nquery = \"q1_exam_by_country\"\n",
        )
        .unwrap();
        assert!(matches!(
            RbacStore::load(&path),
            Err(RbacError::InvalidFile { .. })
        ));
        assert!(RbacStore::load_or_default(dir.path().join("absent.toml")).is_ok());
    }

    proptest! {
        #[test]
        fn permitted_is_monotone_in_roles(
            small in prop::sample::subsequence(vec![ADMINISTRATOR, ORGANIZATION_A, RESEARCHER], 0..=3),
            extra in prop::sample::subsequence(vec![ADMINISTRATOR, ORGANIZATION_A, RESEARCHER], 0..=3),
        ) {
            let s = RbacStore::default_fixture();
            let mut big = small.clone();
            big.extend(extra);
            let lo = s.permitted_queries(&small);
            let hi = s.permitted_queries(&big);
            prop_assert!(lo.is_subset(&hi));
            for q in CANONICAL_IDS {
                prop_assert_eq!(s.check_permission(&small, q), lo.contains(q));
            }
        }
    }
}
