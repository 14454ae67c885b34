//! The store directory:
//!
//! ```text
//! meta.xml                      <store schema="N"/>
//! users.xml
//! audit.log
//! notifications.xml
//! models/<key>/v<n>.xml         one file per version
//! models/<key>/acl.xml          owners and editors
//! blobs/<2 hex>/<sha256>
//! ```

use std::collections::BTreeSet;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use gallery_core::access::User;
use gallery_core::document;
use gallery_core::model::is_model_key;
use gallery_core::schema::validate_version;
use gallery_core::workflow::Notification;
use gallery_core::{BlobId, ModelHistory, ModelKey, ModelVersion};

use crate::blobs::BlobStore;
use crate::error::{Result, StoreError};
use crate::fsutil::{self, FailPoints};
use crate::records::{self, AuditRecord};

pub const META: &str = "meta.xml";
pub const USERS: &str = "users.xml";
pub const AUDIT: &str = "audit.log";
pub const NOTIFICATIONS: &str = "notifications.xml";
pub const MODELS: &str = "models";
pub const BLOBS: &str = "blobs";
pub const ACL: &str = "acl.xml";

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
    fail: FailPoints,
    blobs: BlobStore,
}

impl Store {
    /// Open an existing store.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let store = Self::at(root.into(), FailPoints::default());
        store.schema_version()?;
        Ok(store)
    }

    /// Open the store at `root`, creating an empty one at `schema` if there is
    /// none yet.
    pub fn open_or_init(root: impl Into<PathBuf>, schema: u32) -> Result<Self> {
        let store = Self::at(root.into(), FailPoints::default());
        if !store.root.join(META).exists() {
            fs::create_dir_all(store.root.join(MODELS)).map_err(StoreError::io(&store.root))?;
            fs::create_dir_all(store.root.join(BLOBS)).map_err(StoreError::io(&store.root))?;
            fsutil::atomic_write(&store.root.join(META), records::meta_to_xml(schema).as_bytes(), &store.fail)?;
        }
        store.schema_version()?;
        Ok(store)
    }

    fn at(root: PathBuf, fail: FailPoints) -> Self {
        let blobs = BlobStore::new(root.join(BLOBS), fail.clone());
        Self { root, fail, blobs }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn fail_points(&self) -> &FailPoints {
        &self.fail
    }

    pub fn blobs(&self) -> &BlobStore {
        &self.blobs
    }

    pub fn schema_version(&self) -> Result<u32> {
        records::meta_from_xml(&fsutil::read_string(&self.root.join(META))?)
    }

    fn model_dir(&self, key: &ModelKey) -> PathBuf {
        self.root.join(MODELS).join(key.as_str())
    }

    pub fn version_path(&self, key: &ModelKey, version: u32) -> PathBuf {
        self.model_dir(key).join(format!("v{version}.xml"))
    }

    pub fn list_keys(&self) -> Result<Vec<ModelKey>> {
        let dir = self.root.join(MODELS);
        let mut keys = Vec::new();
        let entries = match fs::read_dir(&dir) {
            Ok(e) => e,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(keys),
            Err(e) => return Err(StoreError::io(dir)(e)),
        };
        for entry in entries {
            let entry = entry.map_err(StoreError::io(&dir))?;
            if let Some(name) = entry.file_name().to_str() {
                if is_model_key(name) && entry.path().join(ACL).is_file() {
                    keys.push(ModelKey::new(name)?);
                }
            }
        }
        keys.sort();
        Ok(keys)
    }

    /// Version numbers present for `key`, ascending.
    fn version_numbers(&self, key: &ModelKey) -> Result<Vec<u32>> {
        let dir = self.model_dir(key);
        let entries = match fs::read_dir(&dir) {
            Ok(e) => e,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(StoreError::NotFound(format!("model {key}"))),
            Err(e) => return Err(StoreError::io(dir)(e)),
        };
        let mut numbers = Vec::new();
        for entry in entries {
            let entry = entry.map_err(StoreError::io(&dir))?;
            let name = entry.file_name();
            let Some(n) = name.to_str().and_then(|s| s.strip_prefix('v')?.strip_suffix(".xml")?.parse().ok()) else {
                continue;
            };
            numbers.push(n);
        }
        numbers.sort_unstable();
        Ok(numbers)
    }

    pub fn load_version(&self, key: &ModelKey, version: u32) -> Result<ModelVersion> {
        let path = self.version_path(key, version);
        let text = fsutil::read_string(&path)?;
        let v = document::parse(&text).map_err(|e| StoreError::Corrupt(format!("{}: {e}", path.display())))?;
        if v.key != *key || v.version != version {
            return Err(StoreError::Corrupt(format!("{} holds {} v{}", path.display(), v.key, v.version)));
        }
        Ok(v)
    }

    pub fn load_history(&self, key: &ModelKey) -> Result<ModelHistory> {
        let acl_path = self.model_dir(key).join(ACL);
        if !acl_path.is_file() {
            return Err(StoreError::NotFound(format!("model {key}")));
        }
        let (owners, editors) = records::acl_from_xml(&fsutil::read_string(&acl_path)?)?;
        let numbers = self.version_numbers(key)?;
        if numbers.is_empty() || numbers.iter().zip(1..).any(|(&n, i)| n != i) {
            return Err(StoreError::Corrupt(format!("model {key} has versions {numbers:?}")));
        }
        let versions = numbers.iter().map(|&n| self.load_version(key, n)).collect::<Result<_>>()?;
        Ok(ModelHistory { key: key.clone(), versions, owners, editors })
    }

    /// Persist one version. It must be valid against its schema and the schema
    /// must be the store's.
    pub fn save_version(&self, v: &ModelVersion) -> Result<()> {
        let expected = self.schema_version()?;
        if v.schema_version != expected {
            return Err(StoreError::SchemaMismatch { expected, found: v.schema_version });
        }
        let report = validate_version(v, &self.blobs);
        if !report.is_valid() {
            return Err(gallery_core::Error::ValidationFailed(Box::new(report)).into());
        }
        fsutil::atomic_write(&self.version_path(&v.key, v.version), document::serialize(v).as_bytes(), &self.fail)
    }

    pub fn save_acl(&self, history: &ModelHistory) -> Result<()> {
        let xml = records::acl_to_xml(&history.owners, &history.editors);
        fsutil::atomic_write(&self.model_dir(&history.key).join(ACL), xml.as_bytes(), &self.fail)
    }

    /// Write a whole new history: versions first, the ACL last, since the
    /// ACL file is what makes a model directory count as a model.
    pub fn save_history(&self, history: &ModelHistory) -> Result<()> {
        let dir = self.model_dir(&history.key);
        if dir.exists() && !dir.join(ACL).exists() {
            // left over from an interrupted create or delete
            fs::remove_dir_all(&dir).map_err(StoreError::io(&dir))?;
        }
        for v in &history.versions {
            self.save_version(v)?;
        }
        self.save_acl(history)
    }

    pub fn delete_model(&self, key: &ModelKey) -> Result<()> {
        let dir = self.model_dir(key);
        if !dir.join(ACL).is_file() {
            return Err(StoreError::NotFound(format!("model {key}")));
        }
        // Dropping the ACL first makes the deletion visible atomically; the
        // rest is cleanup.
        fs::remove_file(dir.join(ACL)).map_err(StoreError::io(&dir))?;
        fs::remove_dir_all(&dir).map_err(StoreError::io(dir))
    }

    pub fn load_users(&self) -> Result<Vec<User>> {
        match fsutil::read_string(&self.root.join(USERS)) {
            Ok(text) => records::users_from_xml(&text),
            Err(StoreError::NotFound(_)) => Ok(Vec::new()),
            Err(e) => Err(e),
        }
    }

    pub fn save_users<'a>(&self, users: impl IntoIterator<Item = &'a User>) -> Result<()> {
        fsutil::atomic_write(&self.root.join(USERS), records::users_to_xml(users).as_bytes(), &self.fail)
    }

    pub fn append_audit(&self, record: &AuditRecord) -> Result<()> {
        fsutil::append_line(&self.root.join(AUDIT), &records::audit_line(record), &self.fail)
    }

    pub fn read_audit(&self) -> Result<Vec<AuditRecord>> {
        match fsutil::read_string(&self.root.join(AUDIT)) {
            Ok(text) => text.lines().filter(|l| !l.is_empty()).map(records::parse_audit_line).collect(),
            Err(StoreError::NotFound(_)) => Ok(Vec::new()),
            Err(e) => Err(e),
        }
    }

    pub fn load_notifications(&self) -> Result<(u64, Vec<Notification>)> {
        match fsutil::read_string(&self.root.join(NOTIFICATIONS)) {
            Ok(text) => records::notifications_from_xml(&text),
            Err(StoreError::NotFound(_)) => Ok((1, Vec::new())),
            Err(e) => Err(e),
        }
    }

    pub fn save_notifications(&self, next_id: u64, items: &[Notification]) -> Result<()> {
        let xml = records::notifications_to_xml(next_id, items);
        fsutil::atomic_write(&self.root.join(NOTIFICATIONS), xml.as_bytes(), &self.fail)
    }

    /// Every blob id named by any version of any model on disk.
    pub fn referenced_blob_ids(&self) -> Result<BTreeSet<BlobId>> {
        let mut out = BTreeSet::new();
        for key in self.list_keys()? {
            out.extend(self.load_history(&key)?.blob_ids().cloned());
        }
        Ok(out)
    }

    /// Delete every blob no version references. Callers must keep writers
    /// out while this runs. A failure part way leaves a store that is safe to
    /// collect again.
    pub fn collect_garbage(&self) -> Result<BTreeSet<BlobId>> {
        let referenced = self.referenced_blob_ids()?;
        let garbage: BTreeSet<BlobId> = self.blobs.list()?.difference(&referenced).cloned().collect();
        for id in &garbage {
            self.blobs.delete(id)?;
        }
        Ok(garbage)
    }

    /// Problems found by a full scan: unreadable histories, dangling
    /// references, blobs whose bytes do not match their name.
    pub fn check_integrity(&self) -> Result<Vec<String>> {
        let mut problems = Vec::new();
        for key in self.list_keys()? {
            match self.load_history(&key) {
                Ok(h) => problems.extend(h.check_invariants().into_iter().map(|p| format!("{key}: {p}"))),
                Err(e) => problems.push(format!("{key}: {e}")),
            }
        }
        for id in self.referenced_blob_ids().unwrap_or_default() {
            if !self.blobs.contains(&id) {
                problems.push(format!("referenced blob {id} is missing"));
            }
        }
        for id in self.blobs.list()? {
            if let Err(e) = self.blobs.get(&id) {
                problems.push(e.to_string());
            }
        }
        Ok(problems)
    }
}
