//! Accounts, credentials, sessions and the permission matrix.
//!
//! Whether an action is allowed depends on three things: the caller's global
//! role, their role on the model, and the status of the targeted version.
//!
//! | action | admin      | owner           | editor    | reviewer      | author    | anonymous |
//! |--------|------------|-----------------|-----------|---------------|-----------|-----------|
//! | READ   | all        | all             | all       | pend/appr/rej | appr      | appr      |
//! | WRITE  | all        | edit            | edit      | pending       | -         | -         |
//! | SUBMIT | edit       | edit            | -         | -             | -         | -         |
//! | REVIEW | pending    | -               | -         | pending       | -         | -         |
//! | GRANT  | any        | any             | -         | -             | -         | -         |
//! | DELETE | any        | no approved yet | -         | -             | -         | -         |
//! | REOPEN | approved   | approved        | -         | -             | -         | -         |
//!
//! A reviewer or admin who owns or edits a model never gets REVIEW on it; a
//! reviewer holding a model role is treated purely as owner/editor.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine as _;
use parking_lot::Mutex;
use rand::rngs::OsRng;
use rand::RngCore;

use crate::error::{Error, Result};
use crate::model::{ModelHistory, Status};
use crate::time::Timestamp;

pub const MIN_PASSWORD_LEN: usize = 8;
pub const BCRYPT_COST: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GlobalRole {
    Admin,
    Reviewer,
    Author,
}

impl GlobalRole {
    pub fn as_str(self) -> &'static str {
        match self {
            GlobalRole::Admin => "admin",
            GlobalRole::Reviewer => "reviewer",
            GlobalRole::Author => "author",
        }
    }
}

impl fmt::Display for GlobalRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GlobalRole {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "admin" => Ok(GlobalRole::Admin),
            "reviewer" => Ok(GlobalRole::Reviewer),
            "author" => Ok(GlobalRole::Author),
            _ => Err(Error::InvalidUser(format!("unknown role {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelRole {
    Owner,
    Editor,
}

impl ModelRole {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelRole::Owner => "owner",
            ModelRole::Editor => "editor",
        }
    }
}

impl FromStr for ModelRole {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "owner" => Ok(ModelRole::Owner),
            "editor" => Ok(ModelRole::Editor),
            _ => Err(Error::Malformed(format!("unknown model role {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Read,
    Write,
    Submit,
    Review,
    Grant,
    Delete,
    Reopen,
}

impl Action {
    pub const ALL: [Action; 7] =
        [Action::Read, Action::Write, Action::Submit, Action::Review, Action::Grant, Action::Delete, Action::Reopen];
}

/// `^[a-z0-9_.-]{2,32}$`
pub fn is_username(s: &str) -> bool {
    (2..=32).contains(&s.len())
        && s.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || matches!(b, b'_' | b'.' | b'-'))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct User {
    pub username: String,
    pub display_name: String,
    pub email: String,
    pub global_role: GlobalRole,
    pub password_hash: String,
}

impl User {
    pub fn new(
        username: &str,
        display_name: &str,
        email: &str,
        global_role: GlobalRole,
        password_hash: String,
    ) -> Result<Self> {
        if !is_username(username) {
            return Err(Error::InvalidUser(format!("invalid username {username:?}")));
        }
        if !email.contains('@') {
            return Err(Error::InvalidUser(format!("invalid email {email:?}")));
        }
        if password_hash.is_empty() {
            return Err(Error::InvalidUser("empty password hash".into()));
        }
        Ok(Self {
            username: username.to_owned(),
            display_name: display_name.to_owned(),
            email: email.to_owned(),
            global_role,
            password_hash,
        })
    }
}

/// Salted bcrypt hash at cost 10.
pub fn hash_password(password: &str) -> Result<String> {
    if password.chars().count() < MIN_PASSWORD_LEN {
        return Err(Error::WeakPassword);
    }
    bcrypt::hash(password, BCRYPT_COST).map_err(|e| Error::Hashing(e.to_string()))
}

pub fn verify_password(password: &str, hash: &str) -> Result<bool> {
    bcrypt::verify(password, hash).map_err(|_| Error::MalformedHash)
}

/// Who the caller is relative to one model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActorClass {
    Admin { member: bool },
    Owner,
    Editor,
    Reviewer,
    Author,
    Anonymous,
}

impl ActorClass {
    pub fn of(user: Option<&User>, history: &ModelHistory) -> Self {
        let Some(user) = user else { return ActorClass::Anonymous };
        let role = history.role_of(&user.username);
        match (user.global_role, role) {
            (GlobalRole::Admin, r) => ActorClass::Admin { member: r.is_some() },
            (_, Some(ModelRole::Owner)) => ActorClass::Owner,
            (_, Some(ModelRole::Editor)) => ActorClass::Editor,
            (GlobalRole::Reviewer, None) => ActorClass::Reviewer,
            (GlobalRole::Author, None) => ActorClass::Author,
        }
    }
}

/// The permission matrix. Total: never fails, unknown versions are denied.
pub fn permit(user: Option<&User>, history: &ModelHistory, target_version: u32, action: Action) -> bool {
    let Some(target) = history.version(target_version) else { return false };
    let latest_only = !matches!(action, Action::Read | Action::Write);
    if latest_only && target_version != history.latest().version {
        return false;
    }
    let s = target.status;
    use ActorClass as A;
    match (action, ActorClass::of(user, history)) {
        (Action::Read, A::Admin { .. } | A::Owner | A::Editor) => true,
        (Action::Read, A::Reviewer) => s != Status::Edit,
        (Action::Read, A::Author | A::Anonymous) => s == Status::Approved,

        (Action::Write, A::Admin { .. }) => true,
        (Action::Write, A::Owner | A::Editor) => s == Status::Edit,
        (Action::Write, A::Reviewer) => s == Status::Pending,

        (Action::Submit, A::Admin { .. } | A::Owner) => s == Status::Edit,

        (Action::Review, A::Admin { member: false } | A::Reviewer) => s == Status::Pending,

        (Action::Grant, A::Admin { .. } | A::Owner) => true,

        (Action::Delete, A::Admin { .. }) => true,
        (Action::Delete, A::Owner) => !history.has_approved(),

        (Action::Reopen, A::Admin { .. } | A::Owner) => s == Status::Approved,

        _ => false,
    }
}

/// The version a caller sees when asking for a model without a version
/// number: the latest if they may read it, else the current public one.
pub fn visible_version<'h>(user: Option<&User>, history: &'h ModelHistory) -> Option<&'h crate::model::ModelVersion> {
    let latest = history.latest();
    if permit(user, history, latest.version, Action::Read) {
        Some(latest)
    } else {
        crate::model::current_public_version(history)
    }
}

/// Add `target` to the model with `role`. The target must be a known user.
pub fn grant(
    actor: &User,
    history: &mut ModelHistory,
    target: &str,
    role: ModelRole,
    users: &impl UserDirectory,
) -> Result<()> {
    if !permit(Some(actor), history, history.latest().version, Action::Grant) {
        return Err(Error::Forbidden);
    }
    if users.find_user(target).is_none() {
        return Err(Error::UnknownUser(target.to_owned()));
    }
    history.set_role(target, role);
    Ok(())
}

pub trait UserDirectory {
    fn find_user(&self, username: &str) -> Option<User>;
}

impl UserDirectory for HashMap<String, User> {
    fn find_user(&self, username: &str) -> Option<User> {
        self.get(username).cloned()
    }
}

impl UserDirectory for BTreeMap<String, User> {
    fn find_user(&self, username: &str) -> Option<User> {
        self.get(username).cloned()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    pub token: String,
    pub username: String,
    pub created_at: Timestamp,
    pub expires_at: Timestamp,
}

/// Live sessions. All operations take one lock, so a revoked or expired
/// token can never authenticate after the revocation or expiry is observed.
#[derive(Debug, Default)]
pub struct SessionTable {
    sessions: Mutex<HashMap<String, Session>>,
}

/// 256 bits from the OS generator, URL-safe base64.
pub fn new_session_token() -> String {
    let mut bytes = [0u8; 32];
    OsRng.fill_bytes(&mut bytes);
    URL_SAFE_NO_PAD.encode(bytes)
}

impl SessionTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn create(&self, username: &str, now: Timestamp, ttl: chrono::Duration) -> Session {
        let session = Session {
            token: new_session_token(),
            username: username.to_owned(),
            created_at: now,
            expires_at: now + ttl,
        };
        self.sessions.lock().insert(session.token.clone(), session.clone());
        session
    }

    /// The session's user if the token is live; expired entries are purged.
    pub fn resolve(&self, token: &str, now: Timestamp) -> Option<String> {
        let mut sessions = self.sessions.lock();
        match sessions.get(token) {
            Some(s) if now < s.expires_at => Some(s.username.clone()),
            Some(_) => {
                sessions.remove(token);
                None
            }
            None => None,
        }
    }

    pub fn revoke(&self, token: &str) -> bool {
        self.sessions.lock().remove(token).is_some()
    }

    pub fn purge_expired(&self, now: Timestamp) -> usize {
        let mut sessions = self.sessions.lock();
        let before = sessions.len();
        sessions.retain(|_, s| now < s.expires_at);
        before - sessions.len()
    }

    pub fn len(&self) -> usize {
        self.sessions.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub enum Credentials<'a> {
    Password { username: &'a str, password: &'a str },
    Session(&'a str),
}

// Verified against when the user does not exist, so both failure paths cost
// one bcrypt verification.
const DUMMY_HASH: &str = "$2b$10$N9qo8uLOickgx2ZMRZoMyeIjZAgcfl7p92ldGxad68LJZdL17lhWy";

fn check_password(users: &impl UserDirectory, username: &str, password: &str) -> Result<User> {
    match users.find_user(username) {
        Some(user) if verify_password(password, &user.password_hash).unwrap_or(false) => Ok(user),
        Some(_) => Err(Error::BadCredentials),
        None => {
            let _ = verify_password(password, DUMMY_HASH);
            Err(Error::BadCredentials)
        }
    }
}

pub fn login(
    users: &impl UserDirectory,
    sessions: &SessionTable,
    username: &str,
    password: &str,
    now: Timestamp,
    ttl: chrono::Duration,
) -> Result<Session> {
    let user = check_password(users, username, password)?;
    Ok(sessions.create(&user.username, now, ttl))
}

pub fn authenticate(
    users: &impl UserDirectory,
    sessions: &SessionTable,
    credentials: Credentials<'_>,
    now: Timestamp,
) -> Result<User> {
    match credentials {
        Credentials::Password { username, password } => {
            check_password(users, username, password).map_err(|_| Error::Unauthenticated)
        }
        Credentials::Session(token) => sessions
            .resolve(token, now)
            .and_then(|name| users.find_user(&name))
            .ok_or(Error::Unauthenticated),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::time::parse_timestamp;

    fn user(name: &str, role: GlobalRole) -> User {
        User::new(name, name, &format!("{name}@example.org"), role, "x".into()).unwrap()
    }

    fn history(status: Status) -> ModelHistory {
        let mut h = fixtures::koebe_polyhedra().history;
        h.owners = ["olga".to_owned()].into();
        h.editors = ["ed".to_owned()].into();
        h.versions[0].status = status;
        h
    }

    #[test]
    fn named_cells() {
        let admin = user("root", GlobalRole::Admin);
        for s in Status::ALL {
            assert!(permit(Some(&admin), &history(s), 1, Action::Write));
        }
        let owner = user("olga", GlobalRole::Author);
        assert!(!permit(Some(&owner), &history(Status::Pending), 1, Action::Write));
        let rev_owner = user("olga", GlobalRole::Reviewer);
        assert!(!permit(Some(&rev_owner), &history(Status::Pending), 1, Action::Review));
        let rev = user("rita", GlobalRole::Reviewer);
        assert!(permit(Some(&rev), &history(Status::Pending), 1, Action::Review));
    }

    #[test]
    fn admin_member_cannot_review() {
        let mut h = history(Status::Pending);
        h.owners.insert("root".into());
        let admin = user("root", GlobalRole::Admin);
        assert!(!permit(Some(&admin), &h, 1, Action::Review));
        assert!(permit(Some(&admin), &h, 1, Action::Write));
    }

    #[test]
    fn owner_delete_blocked_once_published() {
        let owner = user("olga", GlobalRole::Author);
        let mut h = history(Status::Approved);
        assert!(!permit(Some(&owner), &h, 1, Action::Delete));
        h.versions[0].status = Status::Rejected;
        assert!(permit(Some(&owner), &h, 1, Action::Delete));
    }

    #[test]
    fn latest_only_actions_reject_old_versions() {
        let owner = user("olga", GlobalRole::Author);
        let mut h = history(Status::Approved);
        let mut v2 = h.versions[0].clone();
        v2.version = 2;
        v2.status = Status::Edit;
        h.versions.push(v2);
        assert!(!permit(Some(&owner), &h, 1, Action::Reopen));
        assert!(permit(Some(&owner), &h, 1, Action::Read));
        assert!(permit(Some(&owner), &h, 2, Action::Submit));
        assert!(!permit(Some(&owner), &h, 3, Action::Read));
        assert_eq!(visible_version(None, &h).unwrap().version, 1);
        assert_eq!(visible_version(Some(&owner), &h).unwrap().version, 2);
    }

    #[test]
    fn grant_moves_between_roles() {
        let owner = user("olga", GlobalRole::Author);
        let editor = user("ed", GlobalRole::Author);
        let users: HashMap<String, User> =
            [("bob".to_owned(), user("bob", GlobalRole::Author)), ("ed".to_owned(), editor.clone())].into();
        let mut h = history(Status::Edit);
        grant(&owner, &mut h, "bob", ModelRole::Editor, &users).unwrap();
        assert!(h.editors.contains("bob"));
        assert!(matches!(grant(&editor, &mut h, "bob", ModelRole::Owner, &users), Err(Error::Forbidden)));
        grant(&owner, &mut h, "ed", ModelRole::Owner, &users).unwrap();
        assert!(h.owners.contains("ed") && !h.editors.contains("ed"));
        assert!(matches!(grant(&owner, &mut h, "nobody", ModelRole::Editor, &users), Err(Error::UnknownUser(_))));
    }

    #[test]
    fn password_rules() {
        assert!(matches!(hash_password("a"), Err(Error::WeakPassword)));
        let h = hash_password("correct horse battery").unwrap();
        assert!(h.starts_with("$2b$10$"));
        assert!(verify_password("correct horse battery", &h).unwrap());
        assert!(!verify_password("correct horse batteryx", &h).unwrap());
        assert!(matches!(verify_password("p", "garbage"), Err(Error::MalformedHash)));
        assert_ne!(h, hash_password("correct horse battery").unwrap());
    }

    #[test]
    fn sessions_expire_and_revoke() {
        let t0 = parse_timestamp("2020-01-01T00:00:00Z").unwrap();
        let table = SessionTable::new();
        let s = table.create("alice", t0, chrono::Duration::hours(24));
        assert_eq!((s.expires_at - s.created_at).num_hours(), 24);
        assert_eq!(s.token.len(), 43);
        assert_eq!(table.resolve(&s.token, t0 + chrono::Duration::hours(23)).as_deref(), Some("alice"));
        assert_eq!(table.resolve(&s.token, t0 + chrono::Duration::hours(24)), None);
        assert!(table.is_empty());
        let s2 = table.create("alice", t0, chrono::Duration::hours(24));
        assert!(table.revoke(&s2.token));
        assert_eq!(table.resolve(&s2.token, t0), None);
    }

    #[test]
    fn login_does_not_enumerate_users() {
        let t0 = parse_timestamp("2020-01-01T00:00:00Z").unwrap();
        let hash = hash_password("hunter2hunter2").unwrap();
        let alice = User::new("alice", "Alice", "a@example.org", GlobalRole::Author, hash).unwrap();
        let users: HashMap<String, User> = [("alice".to_owned(), alice.clone())].into();
        let table = SessionTable::new();
        let ttl = chrono::Duration::hours(24);
        let unknown = login(&users, &table, "mallory", "hunter2hunter2", t0, ttl).unwrap_err();
        let wrong = login(&users, &table, "alice", "wrong-password", t0, ttl).unwrap_err();
        assert_eq!(unknown.code(), "BAD_CREDENTIALS");
        assert_eq!(unknown.to_string(), wrong.to_string());
        assert!(table.is_empty());

        let s = login(&users, &table, "alice", "hunter2hunter2", t0, ttl).unwrap();
        assert_eq!(authenticate(&users, &table, Credentials::Session(&s.token), t0).unwrap(), alice);
        let pw = Credentials::Password { username: "alice", password: "hunter2hunter2" };
        assert_eq!(authenticate(&users, &table, pw, t0).unwrap(), alice);
        let late = t0 + chrono::Duration::hours(25);
        assert!(matches!(
            authenticate(&users, &table, Credentials::Session(&s.token), late),
            Err(Error::Unauthenticated)
        ));
    }

    #[test]
    fn dummy_hash_is_well_formed() {
        assert!(!verify_password("anything", DUMMY_HASH).unwrap());
    }
}
