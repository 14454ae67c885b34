//! Model documents: a description plus media objects, kept as a history of
//! numbered versions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use sha2::{Digest, Sha256};

use crate::access::{ModelRole, User};
use crate::error::{Error, Result};
use crate::schema::{validate_version, BlobCatalog};
use crate::time::Timestamp;

/// License attached to every published model.
pub const DEFAULT_LICENSE: &str = "CC BY-SA 4.0";

const KEY_MIN: usize = 3;
const KEY_MAX: usize = 64;
const MAX_DISAMBIGUATION: u32 = 99;

/// Unique model identifier, also the permalink path segment.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModelKey(String);

impl ModelKey {
    pub fn new(s: impl Into<String>) -> Result<Self> {
        let s = s.into();
        if is_model_key(&s) {
            Ok(Self(s))
        } else {
            Err(Error::InvalidKey(s))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Derive a key from a title. `taken` reports keys already in use.
    pub fn derive(title: &str, taken: impl Fn(&str) -> bool) -> Result<Self> {
        if title.trim().is_empty() {
            return Err(Error::InvalidTitle);
        }
        let base = slug(title);
        if !taken(&base) {
            return Ok(Self(base));
        }
        for n in 2..=MAX_DISAMBIGUATION {
            let suffix = format!("_{n}");
            let mut candidate = base.clone();
            candidate.truncate(KEY_MAX - suffix.len());
            candidate.push_str(&suffix);
            if !taken(&candidate) {
                return Ok(Self(candidate));
            }
        }
        Err(Error::DuplicateKey(base))
    }
}

impl fmt::Display for ModelKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::borrow::Borrow<str> for ModelKey {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl AsRef<str> for ModelKey {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// `^[a-z0-9][a-z0-9_-]{2,63}$`
pub fn is_model_key(s: &str) -> bool {
    let b = s.as_bytes();
    (KEY_MIN..=KEY_MAX).contains(&b.len())
        && (b[0].is_ascii_lowercase() || b[0].is_ascii_digit())
        && b[1..]
            .iter()
            .all(|&c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == b'_' || c == b'-')
}

/// Lowercase, collapse every run outside `[a-z0-9]` to `_`, trim `_`,
/// truncate to 64, right-pad with `0` to length 3.
pub fn slug(title: &str) -> String {
    let mut out = String::with_capacity(title.len());
    let mut in_gap = false;
    for ch in title.chars().flat_map(char::to_lowercase) {
        if ch.is_ascii_lowercase() || ch.is_ascii_digit() {
            out.push(ch);
            in_gap = false;
        } else if !in_gap {
            out.push('_');
            in_gap = true;
        }
    }
    let mut out = out.trim_matches('_').to_owned();
    out.truncate(KEY_MAX);
    while out.len() < KEY_MIN {
        out.push('0');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Status {
    Edit,
    Pending,
    Approved,
    Rejected,
}

impl Status {
    pub const ALL: [Status; 4] = [Status::Edit, Status::Pending, Status::Approved, Status::Rejected];

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Edit => "edit",
            Status::Pending => "pending",
            Status::Approved => "approved",
            Status::Rejected => "rejected",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Status {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Status::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::Malformed(format!("unknown status {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuthorRef {
    pub name: String,
    pub affiliation: Option<String>,
    pub position: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reference {
    pub ref_key: String,
    pub entry_type: String,
    pub attributes: BTreeMap<String, String>,
}

/// Lowercase hex SHA-256 of a blob's bytes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlobId(String);

impl BlobId {
    pub fn new(s: impl Into<String>) -> Result<Self> {
        let s = s.into();
        if is_blob_id(&s) {
            Ok(Self(s))
        } else {
            Err(Error::Malformed(format!("invalid blob id {s:?}")))
        }
    }

    /// Content address of `bytes`.
    pub fn digest(bytes: &[u8]) -> Self {
        Self(hex::encode(Sha256::digest(bytes)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// First two hex characters, used for directory fan-out.
    pub fn prefix(&self) -> &str {
        &self.0[..2]
    }
}

impl fmt::Display for BlobId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn is_blob_id(s: &str) -> bool {
    s.len() == 64 && s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileRef {
    pub blob_id: BlobId,
    pub filename: String,
    pub media_type: String,
    pub size_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MediaObject {
    pub media_id: String,
    pub title: String,
    pub text: String,
    pub files: Vec<FileRef>,
    pub preview: Option<FileRef>,
}

impl MediaObject {
    pub fn blob_ids(&self) -> impl Iterator<Item = &BlobId> {
        self.files.iter().chain(self.preview.iter()).map(|f| &f.blob_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Description {
    pub title: String,
    pub authors: Vec<AuthorRef>,
    pub text: String,
    pub keywords: BTreeSet<String>,
    pub references: Vec<Reference>,
    /// Creation date of the version carrying this description.
    pub date: NaiveDate,
    /// Present from schema 2 on.
    pub license: Option<String>,
}

/// Everything an edit may change.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Content {
    pub description: Description,
    pub media: Vec<MediaObject>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelVersion {
    pub key: ModelKey,
    pub version: u32,
    pub status: Status,
    pub edited_by: String,
    pub schema_version: u32,
    pub description: Description,
    pub media: Vec<MediaObject>,
    pub created_at: Timestamp,
}

impl ModelVersion {
    pub fn blob_ids(&self) -> impl Iterator<Item = &BlobId> {
        self.media.iter().flat_map(MediaObject::blob_ids)
    }

    pub fn content(&self) -> Content {
        Content { description: self.description.clone(), media: self.media.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelHistory {
    pub key: ModelKey,
    pub versions: Vec<ModelVersion>,
    pub owners: BTreeSet<String>,
    pub editors: BTreeSet<String>,
}

impl ModelHistory {
    pub fn latest(&self) -> &ModelVersion {
        self.versions.last().expect("model history is never empty")
    }

    pub(crate) fn latest_mut(&mut self) -> &mut ModelVersion {
        self.versions.last_mut().expect("model history is never empty")
    }

    pub fn version(&self, n: u32) -> Option<&ModelVersion> {
        let idx = usize::try_from(n).ok()?.checked_sub(1)?;
        self.versions.get(idx)
    }

    pub fn role_of(&self, username: &str) -> Option<ModelRole> {
        if self.owners.contains(username) {
            Some(ModelRole::Owner)
        } else if self.editors.contains(username) {
            Some(ModelRole::Editor)
        } else {
            None
        }
    }

    pub fn has_approved(&self) -> bool {
        self.versions.iter().any(|v| v.status == Status::Approved)
    }

    pub fn blob_ids(&self) -> impl Iterator<Item = &BlobId> {
        self.versions.iter().flat_map(ModelVersion::blob_ids)
    }

    /// Add `username` with `role`, moving them out of the other role set.
    pub fn set_role(&mut self, username: &str, role: ModelRole) {
        match role {
            ModelRole::Owner => {
                self.editors.remove(username);
                self.owners.insert(username.to_owned());
            }
            ModelRole::Editor => {
                self.owners.remove(username);
                self.editors.insert(username.to_owned());
            }
        }
    }

    /// Structural invariants of a history, as human-readable complaints.
    pub fn check_invariants(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if self.versions.is_empty() {
            problems.push("history has no versions".to_owned());
        }
        for (i, v) in self.versions.iter().enumerate() {
            if v.version as usize != i + 1 {
                problems.push(format!("version {} at position {}", v.version, i + 1));
            }
            if v.key != self.key {
                problems.push(format!("version {} carries key {}", v.version, v.key));
            }
        }
        for w in self.versions.windows(2) {
            if w[1].created_at < w[0].created_at {
                problems.push(format!("version {} predates version {}", w[1].version, w[0].version));
            }
        }
        if self.owners.is_empty() {
            problems.push("model has no owner".to_owned());
        }
        if let Some(u) = self.owners.intersection(&self.editors).next() {
            problems.push(format!("{u} is both owner and editor"));
        }
        problems
    }
}

/// Create the first version of a new model owned by `creator`.
pub fn create_model(
    title: &str,
    creator: &User,
    schema_version: u32,
    now: Timestamp,
    key_taken: impl Fn(&str) -> bool,
) -> Result<ModelHistory> {
    if title.trim().is_empty() {
        return Err(Error::InvalidTitle);
    }
    let key = ModelKey::derive(title, key_taken)?;
    let description = Description {
        title: title.to_owned(),
        authors: vec![AuthorRef { name: creator.display_name.clone(), affiliation: None, position: 0 }],
        text: String::new(),
        keywords: BTreeSet::new(),
        references: Vec::new(),
        date: now.date_naive(),
        license: (schema_version >= 2).then(|| DEFAULT_LICENSE.to_owned()),
    };
    let v1 = ModelVersion {
        key: key.clone(),
        version: 1,
        status: Status::Edit,
        edited_by: creator.username.clone(),
        schema_version,
        description,
        media: Vec::new(),
        created_at: now,
    };
    Ok(ModelHistory {
        key,
        versions: vec![v1],
        owners: BTreeSet::from([creator.username.clone()]),
        editors: BTreeSet::new(),
    })
}

/// Append a new content version. Permission checks are the caller's job;
/// this enforces the state rule and content validity.
pub fn append_edit<'h>(
    history: &'h mut ModelHistory,
    actor: &str,
    content: Content,
    now: Timestamp,
    blobs: &dyn BlobCatalog,
) -> Result<&'h ModelVersion> {
    let latest = history.latest();
    if matches!(latest.status, Status::Approved | Status::Rejected) {
        return Err(Error::ForbiddenState(latest.status));
    }
    let next = successor(latest, actor, latest.status, content, now);
    let report = validate_version(&next, blobs);
    if !report.is_valid() {
        return Err(Error::ValidationFailed(Box::new(report)));
    }
    history.versions.push(next);
    Ok(history.latest())
}

/// Build version n+1 of `prev` with the given content. The description date
/// follows the creation time; time never runs backwards within a history.
pub(crate) fn successor(
    prev: &ModelVersion,
    actor: &str,
    status: Status,
    content: Content,
    now: Timestamp,
) -> ModelVersion {
    let created_at = now.max(prev.created_at);
    let mut description = content.description;
    description.date = created_at.date_naive();
    ModelVersion {
        key: prev.key.clone(),
        version: prev.version + 1,
        status,
        edited_by: actor.to_owned(),
        schema_version: prev.schema_version,
        description,
        media: content.media,
        created_at,
    }
}

/// Highest-numbered approved version, the one the permalink serves.
pub fn current_public_version(history: &ModelHistory) -> Option<&ModelVersion> {
    history.versions.iter().rev().find(|v| v.status == Status::Approved)
}
