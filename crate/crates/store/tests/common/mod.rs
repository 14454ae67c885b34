#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::Duration;
use gallery_core::access::{GlobalRole, User};
use gallery_core::time::{parse_timestamp, ManualClock};
use gallery_store::{Gallery, GalleryOptions};

/// Every file under `root` with its bytes, keyed by relative path.
pub fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    walkdir::WalkDir::new(root)
        .into_iter()
        .map(|e| e.unwrap())
        .filter(|e| e.file_type().is_file())
        .map(|e| (e.path().strip_prefix(root).unwrap().to_owned(), std::fs::read(e.path()).unwrap()))
        .collect()
}

pub fn clock() -> Arc<ManualClock> {
    Arc::new(ManualClock::new(parse_timestamp("2024-05-01T09:00:00Z").unwrap()))
}

pub fn open(root: &Path, clock: Arc<ManualClock>) -> Gallery {
    Gallery::open(root, GalleryOptions { session_ttl: Duration::hours(24), clock }).unwrap()
}

/// A user record that skips bcrypt, for tests that never log in.
pub fn fake_user(gallery: &Gallery, name: &str, role: GlobalRole) -> User {
    gallery.add_user(name, name, &format!("{name}@example.org"), role, "correct horse battery").unwrap()
}

pub fn user(name: &str, role: GlobalRole) -> User {
    User::new(name, name, &format!("{name}@example.org"), role, "unused".into()).unwrap()
}
