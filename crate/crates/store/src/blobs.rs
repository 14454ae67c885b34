//! Content-addressed blob files under `blobs/<2 hex>/<sha256>`.

use std::collections::BTreeSet;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use gallery_core::model::is_blob_id;
use gallery_core::schema::BlobCatalog;
use gallery_core::BlobId;

use crate::error::{Result, StoreError};
use crate::fsutil::{self, FailPoints};

#[derive(Debug, Clone)]
pub struct BlobStore {
    dir: PathBuf,
    fail: FailPoints,
}

impl BlobStore {
    pub fn new(dir: impl Into<PathBuf>, fail: FailPoints) -> Self {
        Self { dir: dir.into(), fail }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_of(&self, id: &BlobId) -> PathBuf {
        self.dir.join(id.prefix()).join(id.as_str())
    }

    /// Store `bytes` and return their id. Storing the same bytes again is a
    /// no-op as long as the existing file is intact.
    pub fn put(&self, bytes: &[u8]) -> Result<BlobId> {
        let id = BlobId::digest(bytes);
        let path = self.path_of(&id);
        if path.exists() && self.get(&id).is_ok() {
            return Ok(id);
        }
        fsutil::atomic_write(&path, bytes, &self.fail)?;
        match self.get(&id) {
            Ok(_) => Ok(id),
            Err(StoreError::CorruptBlob(_)) => Err(StoreError::Io {
                path,
                source: io::Error::other("digest mismatch after write"),
            }),
            Err(e) => Err(e),
        }
    }

    pub fn get(&self, id: &BlobId) -> Result<Vec<u8>> {
        let bytes = match fs::read(self.path_of(id)) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(StoreError::NotFound(format!("blob {id}"))),
            Err(e) => return Err(StoreError::io(self.path_of(id))(e)),
        };
        if BlobId::digest(&bytes) != *id {
            return Err(StoreError::CorruptBlob(id.clone()));
        }
        Ok(bytes)
    }

    pub fn contains(&self, id: &BlobId) -> bool {
        self.path_of(id).is_file()
    }

    pub fn list(&self) -> Result<BTreeSet<BlobId>> {
        let mut out = BTreeSet::new();
        let shards = match fs::read_dir(&self.dir) {
            Ok(s) => s,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(out),
            Err(e) => return Err(StoreError::io(&self.dir)(e)),
        };
        for shard in shards {
            let shard = shard.map_err(StoreError::io(&self.dir))?;
            if !shard.file_type().map_err(StoreError::io(shard.path()))?.is_dir() {
                continue;
            }
            for f in fs::read_dir(shard.path()).map_err(StoreError::io(shard.path()))? {
                let f = f.map_err(StoreError::io(shard.path()))?;
                let name = f.file_name();
                let Some(name) = name.to_str() else { continue };
                if !fsutil::is_temp(name) && is_blob_id(name) {
                    out.insert(BlobId::new(name).expect("checked"));
                }
            }
        }
        Ok(out)
    }

    pub fn delete(&self, id: &BlobId) -> Result<()> {
        let path = self.path_of(id);
        self.fail.check("blob.delete").map_err(StoreError::io(&path))?;
        match fs::remove_file(&path) {
            Ok(()) => Ok(()),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(()),
            Err(e) => Err(StoreError::io(path)(e)),
        }
    }
}

impl BlobCatalog for BlobStore {
    fn contains_blob(&self, id: &BlobId) -> bool {
        self.contains(id)
    }
}
