use std::collections::HashMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::Mutex;

use crate::error::{Result, StoreError};

/// Named places where a test can make the next file operation fail, to
/// simulate a crash at that point.
#[derive(Debug, Clone, Default)]
pub struct FailPoints(Arc<Mutex<HashMap<String, u32>>>);

impl FailPoints {
    /// Fail the `skip + 1`-th time `name` is reached, once.
    pub fn arm(&self, name: &str, skip: u32) {
        self.0.lock().insert(name.to_owned(), skip);
    }

    pub fn disarm_all(&self) {
        self.0.lock().clear();
    }

    pub fn check(&self, name: &str) -> io::Result<()> {
        let mut map = self.0.lock();
        match map.get_mut(name) {
            None => Ok(()),
            Some(0) => {
                map.remove(name);
                Err(io::Error::other(format!("injected failure at {name}")))
            }
            Some(n) => {
                *n -= 1;
                Ok(())
            }
        }
    }
}

pub const BEFORE_RENAME: &str = "write.before_rename";

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

fn temp_path(path: &Path) -> PathBuf {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("file");
    let n = TEMP_COUNTER.fetch_add(1, Ordering::Relaxed);
    path.with_file_name(format!(".{name}.tmp-{}-{n}", std::process::id()))
}

/// Temp files are dot-prefixed; everything that lists store directories
/// skips them.
pub fn is_temp(name: &str) -> bool {
    name.starts_with('.')
}

/// Write to a temp file in the same directory, then rename over `path`.
///
/// An injected failure leaves the temp file behind, like a crash would.
pub fn atomic_write(path: &Path, bytes: &[u8], fail: &FailPoints) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(StoreError::io(dir))?;
    }
    let tmp = temp_path(path);
    let written = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()
    })();
    if let Err(e) = written {
        let _ = fs::remove_file(&tmp);
        return Err(StoreError::io(&tmp)(e));
    }
    fail.check(BEFORE_RENAME).map_err(StoreError::io(path))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        StoreError::io(path)(e)
    })
}

pub fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| {
        if e.kind() == io::ErrorKind::NotFound {
            StoreError::NotFound(path.display().to_string())
        } else {
            StoreError::io(path)(e)
        }
    })
}

pub fn read_string(path: &Path) -> Result<String> {
    String::from_utf8(read(path)?).map_err(|_| StoreError::Corrupt(format!("{} is not UTF-8", path.display())))
}

/// Append one line and flush it to disk.
pub fn append_line(path: &Path, line: &str, fail: &FailPoints) -> Result<()> {
    fail.check("append").map_err(StoreError::io(path))?;
    let mut f = fs::OpenOptions::new().create(true).append(true).open(path).map_err(StoreError::io(path))?;
    f.write_all(line.as_bytes()).and_then(|_| f.write_all(b"\n")).and_then(|_| f.sync_data()).map_err(StoreError::io(path))
}

/// Copy a directory tree. Files under `link_under` are hard-linked instead
/// of copied; they are never modified in place.
pub fn copy_tree(from: &Path, to: &Path, link_under: &Path) -> Result<()> {
    for entry in walkdir::WalkDir::new(from).sort_by_file_name() {
        let entry = entry.map_err(|e| StoreError::io(from)(e.into()))?;
        let rel = entry.path().strip_prefix(from).expect("walk stays under root");
        let dest = to.join(rel);
        if entry.file_type().is_dir() {
            fs::create_dir_all(&dest).map_err(StoreError::io(&dest))?;
        } else if entry.path().starts_with(link_under) {
            fs::hard_link(entry.path(), &dest)
                .or_else(|_| fs::copy(entry.path(), &dest).map(drop))
                .map_err(StoreError::io(&dest))?;
        } else {
            fs::copy(entry.path(), &dest).map_err(StoreError::io(&dest))?;
        }
    }
    Ok(())
}
