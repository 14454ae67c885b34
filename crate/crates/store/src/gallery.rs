//! The gallery service: every operation the API offers, with persistence,
//! locking and notifications.
//!
//! Locks are taken in this order: the global lock (shared for ordinary work,
//! exclusive for garbage collection and migration), the model index, one
//! model's lock, the user table, the inbox.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use chrono::Duration;
use parking_lot::{Mutex, RwLock};

use gallery_core::access::{self, permit, visible_version, Action, Credentials, GlobalRole, ModelRole, Session, SessionTable, User};
use gallery_core::fixtures;
use gallery_core::model::{create_model, current_public_version, Content, FileRef, DEFAULT_LICENSE};
use gallery_core::time::{Clock, SystemClock};
use gallery_core::workflow::{self, AuditEvent, Notification, Transition, Verdict};
use gallery_core::{BlobId, ModelHistory, ModelKey, ModelVersion, Status};

use crate::error::{Result, StoreError};
use crate::migrate::{migrate_store, MigrationRegistry, MigrationReport};
use crate::records::AuditRecord;
use crate::store::Store;

/// Schema of a freshly created store.
pub const INITIAL_SCHEMA: u32 = 1;

#[derive(Clone)]
pub struct GalleryOptions {
    pub session_ttl: Duration,
    pub clock: Arc<dyn Clock>,
}

impl Default for GalleryOptions {
    fn default() -> Self {
        Self { session_ttl: Duration::hours(24), clock: Arc::new(SystemClock) }
    }
}

/// One row of the model list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSummary {
    pub key: ModelKey,
    pub version: u32,
    pub status: Status,
    pub title: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlobContent {
    pub id: BlobId,
    pub bytes: Vec<u8>,
    /// From a file reference to the blob, if any version has one.
    pub file: Option<FileRef>,
}

struct Inbox {
    next_id: u64,
    items: Vec<Notification>,
}

type Slot = Arc<Mutex<Option<ModelHistory>>>;

pub struct Gallery {
    store: Store,
    clock: Arc<dyn Clock>,
    session_ttl: Duration,
    sessions: SessionTable,
    global: RwLock<()>,
    models: RwLock<BTreeMap<ModelKey, Slot>>,
    users: RwLock<BTreeMap<String, User>>,
    inbox: Mutex<Inbox>,
    migrating: AtomicBool,
}

impl Gallery {
    /// Open the store at `root`, creating it if needed, and load its index.
    pub fn open(root: &Path, options: GalleryOptions) -> Result<Self> {
        let store = Store::open_or_init(root, INITIAL_SCHEMA)?;
        let (next_id, items) = store.load_notifications()?;
        let gallery = Self {
            clock: options.clock,
            session_ttl: options.session_ttl,
            sessions: SessionTable::new(),
            global: RwLock::new(()),
            models: RwLock::new(BTreeMap::new()),
            users: RwLock::new(BTreeMap::new()),
            inbox: Mutex::new(Inbox { next_id, items }),
            migrating: AtomicBool::new(false),
            store,
        };
        gallery.reload()?;
        Ok(gallery)
    }

    fn reload(&self) -> Result<()> {
        let mut models = BTreeMap::new();
        for key in self.store.list_keys()? {
            let h = self.store.load_history(&key)?;
            models.insert(key, Arc::new(Mutex::new(Some(h))));
        }
        *self.models.write() = models;
        *self.users.write() = self.store.load_users()?.into_iter().map(|u| (u.username.clone(), u)).collect();
        Ok(())
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn now(&self) -> gallery_core::time::Timestamp {
        self.clock.now()
    }

    pub fn is_migrating(&self) -> bool {
        self.migrating.load(Ordering::SeqCst)
    }

    fn writable(&self) -> Result<()> {
        if self.is_migrating() {
            Err(StoreError::ServiceMigrating)
        } else {
            Ok(())
        }
    }

    // ---- users and sessions

    pub fn add_user(&self, username: &str, display_name: &str, email: &str, role: GlobalRole, password: &str) -> Result<User> {
        self.writable()?;
        let hash = access::hash_password(password)?;
        let user = User::new(username, display_name, email, role, hash)?;
        let mut users = self.users.write();
        if users.contains_key(username) {
            return Err(gallery_core::Error::InvalidUser(format!("user {username:?} already exists")).into());
        }
        users.insert(user.username.clone(), user.clone());
        if let Err(e) = self.store.save_users(users.values()) {
            users.remove(username);
            return Err(e);
        }
        Ok(user)
    }

    pub fn user(&self, username: &str) -> Option<User> {
        self.users.read().get(username).cloned()
    }

    pub fn users(&self) -> Vec<User> {
        self.users.read().values().cloned().collect()
    }

    pub fn login(&self, username: &str, password: &str) -> Result<Session> {
        let users = self.users.read().clone();
        Ok(access::login(&users, &self.sessions, username, password, self.now(), self.session_ttl)?)
    }

    pub fn logout(&self, token: &str) -> bool {
        self.sessions.revoke(token)
    }

    pub fn authenticate(&self, credentials: Credentials<'_>) -> Result<User> {
        let users = self.users.read().clone();
        Ok(access::authenticate(&users, &self.sessions, credentials, self.now())?)
    }

    pub fn sessions(&self) -> &SessionTable {
        &self.sessions
    }

    // ---- reading

    fn slot(&self, key: &str) -> Result<Slot> {
        self.models.read().get(key).cloned().ok_or_else(|| StoreError::NotFound(format!("model {key}")))
    }

    /// A copy of the full history, without permission checks.
    pub fn history(&self, key: &str) -> Result<ModelHistory> {
        self.slot(key)?.lock().clone().ok_or_else(|| StoreError::NotFound(format!("model {key}")))
    }

    pub fn keys(&self) -> Vec<ModelKey> {
        self.models.read().keys().cloned().collect()
    }

    fn hidden(viewer: Option<&User>, key: &str) -> StoreError {
        match viewer {
            None => StoreError::NotFound(format!("model {key}")),
            Some(_) => gallery_core::Error::Forbidden.into(),
        }
    }

    /// The version `viewer` sees at the model's address.
    pub fn get_model(&self, viewer: Option<&User>, key: &str) -> Result<ModelVersion> {
        let h = self.history(key)?;
        visible_version(viewer, &h).cloned().ok_or_else(|| Self::hidden(viewer, key))
    }

    pub fn get_version(&self, viewer: Option<&User>, key: &str, version: u32) -> Result<ModelVersion> {
        let h = self.history(key)?;
        let v = h.version(version).ok_or_else(|| StoreError::NotFound(format!("{key} v{version}")))?;
        if permit(viewer, &h, version, Action::Read) {
            Ok(v.clone())
        } else {
            Err(Self::hidden(viewer, key))
        }
    }

    /// The published version, as served to the public.
    pub fn get_public(&self, key: &str) -> Result<ModelVersion> {
        let h = self.history(key)?;
        current_public_version(&h).cloned().ok_or_else(|| StoreError::NotFound(format!("model {key}")))
    }

    pub fn list_models(&self, viewer: Option<&User>) -> Vec<ModelSummary> {
        let slots: Vec<Slot> = self.models.read().values().cloned().collect();
        slots
            .iter()
            .filter_map(|s| {
                let guard = s.lock();
                let h = guard.as_ref()?;
                let v = visible_version(viewer, h)?;
                Some(ModelSummary {
                    key: h.key.clone(),
                    version: v.version,
                    status: v.status,
                    title: v.description.title.clone(),
                })
            })
            .collect()
    }

    // ---- mutations

    /// Run `f` on a working copy of one model under its lock; the copy
    /// replaces the cached history when `f` succeeds. When `f` fails after
    /// touching disk, the cache is reloaded from disk.
    fn with_model<T>(&self, key: &str, f: impl FnOnce(&mut ModelHistory) -> Result<T>) -> Result<T> {
        self.writable()?;
        let _g = self.global.read();
        let slot = self.slot(key)?;
        let mut guard = slot.lock();
        let current = guard.as_ref().ok_or_else(|| StoreError::NotFound(format!("model {key}")))?;
        let mut work = current.clone();
        match f(&mut work) {
            Ok(t) => {
                *guard = Some(work);
                Ok(t)
            }
            Err(e) => {
                if let Ok(h) = self.store.load_history(&current.key) {
                    *guard = Some(h);
                }
                Err(e)
            }
        }
    }

    fn record(&self, transition: &Transition) -> Result<()> {
        self.store.append_audit(&AuditRecord::Transition(transition.event.clone()))?;
        let mut inbox = self.inbox.lock();
        let mut next = inbox.next_id;
        let fresh = transition.notifications(|| {
            next += 1;
            next - 1
        });
        if fresh.is_empty() {
            return Ok(());
        }
        let mut items = inbox.items.clone();
        items.extend(fresh);
        self.store.save_notifications(next, &items)?;
        inbox.next_id = next;
        inbox.items = items;
        Ok(())
    }

    pub fn create_model(&self, actor: &User, title: &str) -> Result<ModelVersion> {
        self.writable()?;
        let _g = self.global.read();
        let schema = self.store.schema_version()?;
        let mut models = self.models.write();
        let h = create_model(title, actor, schema, self.now(), |k| models.contains_key(k))?;
        self.store.save_history(&h)?;
        let v1 = h.latest().clone();
        models.insert(h.key.clone(), Arc::new(Mutex::new(Some(h))));
        Ok(v1)
    }

    /// Store new content as the next version. `base` is the version the
    /// caller edited; a newer latest version is a conflict.
    pub fn update_model(&self, actor: &User, key: &str, base: Option<u32>, content: Content) -> Result<ModelVersion> {
        let now = self.now();
        self.with_model(key, |h| {
            let latest = h.latest().version;
            if let Some(b) = base.filter(|&b| b != latest) {
                return Err(StoreError::VersionConflict { expected: b, found: latest });
            }
            let v = workflow::edit(h, actor, content, now, self.store.blobs())?.clone();
            self.store.save_version(&v)?;
            Ok(v)
        })
    }

    /// Store an uploaded file. The caller must be allowed to write the
    /// latest version; the model lock is not held while the bytes are
    /// written.
    pub fn upload(&self, actor: &User, key: &str, filename: &str, media_type: &str, bytes: &[u8]) -> Result<FileRef> {
        self.writable()?;
        {
            let h = self.history(key)?;
            let s = h.latest().status;
            if matches!(s, Status::Approved | Status::Rejected) {
                return Err(gallery_core::Error::ForbiddenState(s).into());
            }
            if !permit(Some(actor), &h, h.latest().version, Action::Write) {
                return Err(gallery_core::Error::Forbidden.into());
            }
        }
        let _g = self.global.read();
        let blob_id = self.store.blobs().put(bytes)?;
        Ok(FileRef {
            blob_id,
            filename: filename.to_owned(),
            media_type: media_type.to_owned(),
            size_bytes: bytes.len() as u64,
        })
    }

    fn reviewers(&self) -> Vec<String> {
        self.users.read().values().filter(|u| u.global_role == GlobalRole::Reviewer).map(|u| u.username.clone()).collect()
    }

    pub fn submit(&self, actor: &User, key: &str) -> Result<AuditEvent> {
        let reviewers = self.reviewers();
        let now = self.now();
        self.with_model(key, |h| {
            let t = workflow::submit(h, actor, reviewers, self.store.blobs(), now)?;
            self.store.save_version(h.latest())?;
            self.record(&t)?;
            Ok(t.event)
        })
    }

    pub fn review(&self, actor: &User, key: &str, verdict: Verdict) -> Result<AuditEvent> {
        let now = self.now();
        self.with_model(key, |h| {
            let t = workflow::review(h, actor, verdict, now)?;
            self.store.save_version(h.latest())?;
            self.record(&t)?;
            Ok(t.event)
        })
    }

    pub fn reopen(&self, actor: &User, key: &str) -> Result<(ModelVersion, AuditEvent)> {
        let now = self.now();
        self.with_model(key, |h| {
            let (v, e) = workflow::reopen(h, actor, now)?;
            self.store.save_version(&v)?;
            self.store.append_audit(&AuditRecord::Transition(e.clone()))?;
            Ok((v, e))
        })
    }

    pub fn grant(&self, actor: &User, key: &str, target: &str, role: ModelRole) -> Result<()> {
        let users = self.users.read().clone();
        self.with_model(key, |h| {
            access::grant(actor, h, target, role, &users)?;
            self.store.save_acl(h)
        })
    }

    /// Delete a model with all its versions, then collect garbage. Returns
    /// the blobs that were freed.
    pub fn delete_model(&self, actor: &User, key: &str) -> Result<BTreeSet<BlobId>> {
        self.writable()?;
        {
            let _g = self.global.read();
            let slot = self.slot(key)?;
            let mut guard = slot.lock();
            let h = guard.as_ref().ok_or_else(|| StoreError::NotFound(format!("model {key}")))?;
            workflow::authorize_delete(actor, h)?;
            let model_key = h.key.clone();
            self.store.delete_model(&model_key)?;
            *guard = None;
            self.models.write().remove(&model_key);
            self.store.append_audit(&AuditRecord::Deleted {
                key: model_key,
                actor: actor.username.clone(),
                at: self.now(),
            })?;
        }
        self.run_gc()
    }

    fn run_gc(&self) -> Result<BTreeSet<BlobId>> {
        let _g = self.global.write();
        self.store.collect_garbage()
    }

    pub fn collect_garbage(&self, actor: &User) -> Result<BTreeSet<BlobId>> {
        self.writable()?;
        require_admin(actor)?;
        self.run_gc()
    }

    // ---- blobs

    /// Blob bytes for `viewer`. Blobs of published versions are public;
    /// others need read access to a version that links them. Blobs no
    /// version links yet are open to any signed-in user.
    pub fn read_blob(&self, viewer: Option<&User>, id: &BlobId) -> Result<BlobContent> {
        let _g = self.global.read();
        if !self.store.blobs().contains(id) {
            return Err(StoreError::NotFound(format!("blob {id}")));
        }
        let slots: Vec<Slot> = self.models.read().values().cloned().collect();
        let mut file = None;
        let mut linked = false;
        let mut allowed = false;
        for slot in slots {
            let guard = slot.lock();
            let Some(h) = guard.as_ref() else { continue };
            for v in &h.versions {
                let Some(f) = v.media.iter().flat_map(|m| m.files.iter().chain(&m.preview)).find(|f| f.blob_id == *id) else {
                    continue;
                };
                linked = true;
                if permit(viewer, h, v.version, Action::Read) {
                    allowed = true;
                    file.get_or_insert_with(|| f.clone());
                }
            }
        }
        let allowed = allowed || (!linked && viewer.is_some());
        if !allowed {
            return Err(match viewer {
                None => StoreError::NotFound(format!("blob {id}")),
                Some(_) => gallery_core::Error::Forbidden.into(),
            });
        }
        Ok(BlobContent { id: id.clone(), bytes: self.store.blobs().get(id)?, file })
    }

    pub fn referenced_blob_ids(&self) -> BTreeSet<BlobId> {
        let slots: Vec<Slot> = self.models.read().values().cloned().collect();
        let mut out = BTreeSet::new();
        for s in &slots {
            if let Some(h) = s.lock().as_ref() {
                out.extend(h.blob_ids().cloned());
            }
        }
        out
    }

    // ---- notifications and audit

    pub fn notifications(&self, user: &User) -> Vec<Notification> {
        self.inbox.lock().items.iter().filter(|n| n.recipient == user.username).cloned().collect()
    }

    pub fn mark_read(&self, user: &User, id: u64) -> Result<()> {
        self.writable()?;
        let mut inbox = self.inbox.lock();
        let mut items = inbox.items.clone();
        let n = items
            .iter_mut()
            .find(|n| n.id == id && n.recipient == user.username)
            .ok_or_else(|| StoreError::NotFound(format!("notification {id}")))?;
        if n.read {
            return Ok(());
        }
        n.read = true;
        self.store.save_notifications(inbox.next_id, &items)?;
        inbox.items = items;
        Ok(())
    }

    /// Transition events of models that still exist, oldest first.
    pub fn audit_events(&self) -> Result<Vec<AuditEvent>> {
        let mut events: Vec<AuditEvent> = Vec::new();
        for r in self.store.read_audit()? {
            match r {
                AuditRecord::Transition(e) => events.push(e),
                AuditRecord::Deleted { key, .. } => events.retain(|e| e.key != key),
            }
        }
        Ok(events)
    }

    pub fn audit(&self, actor: &User) -> Result<Vec<AuditEvent>> {
        require_admin(actor)?;
        self.audit_events()
    }

    // ---- maintenance

    /// Migrate the whole store with writers shut out. On success the index
    /// is rebuilt from the migrated documents.
    pub fn migrate(&self, registry: &MigrationRegistry, target: u32, dry_run: bool) -> Result<MigrationReport> {
        if self.migrating.swap(true, Ordering::SeqCst) {
            return Err(StoreError::ServiceMigrating);
        }
        let result = (|| {
            let _g = self.global.write();
            let report = migrate_store(&self.store, registry, target, dry_run)?;
            if !dry_run {
                self.reload()?;
            }
            Ok(report)
        })();
        self.migrating.store(false, Ordering::SeqCst);
        result
    }

    /// Install the bundled example models as published versions. Models
    /// whose key is taken are skipped. Returns the keys installed.
    pub fn seed(&self, owner: Option<&str>, approver: &str) -> Result<Vec<ModelKey>> {
        self.writable()?;
        let _g = self.global.read();
        let schema = self.store.schema_version()?;
        let mut installed = Vec::new();
        for fixture in fixtures::all() {
            let mut h = fixture.history;
            let mut models = self.models.write();
            if models.contains_key(&h.key) {
                continue;
            }
            for bytes in &fixture.blobs {
                self.store.blobs().put(bytes)?;
            }
            if let Some(o) = owner {
                h.owners = BTreeSet::from([o.to_owned()]);
            }
            let submitter = h.owners.iter().next().cloned().unwrap_or_default();
            let v = &mut h.versions[0];
            v.status = Status::Approved;
            v.edited_by = submitter.clone();
            if schema >= 2 {
                v.description.license = Some(DEFAULT_LICENSE.to_owned());
            }
            v.schema_version = schema;
            let at = v.created_at;
            self.store.save_history(&h)?;
            for (actor, from, to, text) in [
                (submitter.as_str(), Status::Edit, Status::Pending, None),
                (approver, Status::Pending, Status::Approved, Some("seeded fixture".to_owned())),
            ] {
                self.store.append_audit(&AuditRecord::Transition(AuditEvent {
                    key: h.key.clone(),
                    version: 1,
                    actor: actor.to_owned(),
                    from_status: from,
                    to_status: to,
                    review_text: text,
                    at,
                }))?;
            }
            installed.push(h.key.clone());
            models.insert(h.key.clone(), Arc::new(Mutex::new(Some(h))));
        }
        Ok(installed)
    }
}

fn require_admin(actor: &User) -> Result<()> {
    if actor.global_role == GlobalRole::Admin {
        Ok(())
    } else {
        Err(gallery_core::Error::Forbidden.into())
    }
}
